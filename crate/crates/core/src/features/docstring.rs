//! Documentation features: word counts, vocabulary and a trigram language tag.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::sync::LazyLock;

/// Minimum word count (exclusive) for a docstring to be considered valid.
pub const MIN_DOCSTRING_WORDS: usize = 3;

pub const DEFAULT_LANGUAGE: &str = "en";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocstringFeatures {
    pub n_words: usize,
    pub vocab_size: usize,
    pub language: String,
}

pub fn extract_docstring_features(docstring: Option<&str>) -> DocstringFeatures {
    let text = docstring.unwrap_or("");
    let words: Vec<&str> = text.split_whitespace().collect();
    let vocab: BTreeSet<String> = words.iter().map(|w| w.to_lowercase()).collect();
    DocstringFeatures {
        n_words: words.len(),
        vocab_size: vocab.len(),
        language: detect_language(text).to_owned(),
    }
}

/// A docstring is valid when it holds more than three words.
pub fn is_valid_docstring(docstring: &str) -> bool {
    docstring.split_whitespace().count() > MIN_DOCSTRING_WORDS
}

// Short reference passages; their character trigrams form each profile.
const PROFILES: &[(&str, &str)] = &[
    (
        "en",
        "the function returns the value of the given input and raises an error if the \
         list is empty. this method is used to compute the result for each item with the \
         default parameters that are passed to the object which should be called when \
         there is a new request from the user or when the data has been loaded",
    ),
    (
        "es",
        "la función devuelve el valor de la entrada dada y lanza un error si la lista \
         está vacía. este método se utiliza para calcular el resultado de cada elemento \
         con los parámetros que se pasan al objeto cuando hay una nueva solicitud del \
         usuario o cuando los datos han sido cargados para que",
    ),
    (
        "fr",
        "la fonction retourne la valeur de l'entrée donnée et lève une erreur si la liste \
         est vide. cette méthode est utilisée pour calculer le résultat de chaque élément \
         avec les paramètres qui sont passés à l'objet lorsque il y a une nouvelle demande \
         de l'utilisateur ou quand les données ont été chargées dans une",
    ),
    (
        "de",
        "die funktion gibt den wert der eingabe zurück und wirft einen fehler wenn die \
         liste leer ist. diese methode wird verwendet um das ergebnis für jedes element \
         mit den parametern zu berechnen die an das objekt übergeben werden wenn eine neue \
         anfrage des benutzers kommt oder die daten geladen wurden und nicht",
    ),
    (
        "pt",
        "a função retorna o valor da entrada dada e lança um erro se a lista estiver \
         vazia. este método é usado para calcular o resultado de cada elemento com os \
         parâmetros que são passados para o objeto quando há uma nova solicitação do \
         usuário ou quando os dados foram carregados não então",
    ),
    (
        "it",
        "la funzione restituisce il valore dell'ingresso dato e solleva un errore se la \
         lista è vuota. questo metodo viene usato per calcolare il risultato di ogni \
         elemento con i parametri che sono passati all'oggetto quando c'è una nuova \
         richiesta dell'utente o quando i dati sono stati caricati della",
    ),
];

fn trigrams(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for word in text
        .to_lowercase()
        .split(|c: char| !c.is_alphabetic() && c != '\'')
        .filter(|w| !w.is_empty())
    {
        let padded: Vec<char> = format!(" {word} ").chars().collect();
        for win in padded.windows(3) {
            out.push(win.iter().collect());
        }
    }
    out
}

static PROFILE_SETS: LazyLock<Vec<(&'static str, HashSet<String>)>> = LazyLock::new(|| {
    PROFILES
        .iter()
        .map(|(lang, text)| (*lang, trigrams(text).into_iter().collect()))
        .collect()
});

/// Best-effort language tag. Text with no alphabetic content, or where no
/// profile beats English, is tagged `en`.
pub fn detect_language(text: &str) -> &'static str {
    let grams = trigrams(text);
    if grams.is_empty() {
        return DEFAULT_LANGUAGE;
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for g in &grams {
        *counts.entry(g.as_str()).or_default() += 1;
    }
    let mut best = (DEFAULT_LANGUAGE, 0usize);
    for (lang, set) in PROFILE_SETS.iter() {
        let score: usize = counts
            .iter()
            .filter(|(g, _)| set.contains(**g))
            .map(|(_, c)| *c)
            .sum();
        if score > best.1 {
            best = (lang, score);
        }
    }
    best.0
}

/// Normalize a raw docstring literal body: drop the common indentation of
/// continuation lines and trim surrounding blank lines.
pub fn clean_docstring(raw: &str) -> String {
    let expanded = raw.replace('\t', "        ");
    let lines: Vec<&str> = expanded.lines().collect();
    if lines.is_empty() {
        return String::new();
    }
    let margin = lines[1..]
        .iter()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.len() - l.trim_start().len())
        .min()
        .unwrap_or(0);
    let mut cleaned: Vec<String> = Vec::with_capacity(lines.len());
    cleaned.push(lines[0].trim().to_owned());
    for line in &lines[1..] {
        let mut cut = margin.min(line.len() - line.trim_start().len());
        while !line.is_char_boundary(cut) {
            cut -= 1;
        }
        cleaned.push(line[cut..].trim_end().to_owned());
    }
    while cleaned.last().is_some_and(|l| l.is_empty()) {
        cleaned.pop();
    }
    while cleaned.first().is_some_and(|l| l.is_empty()) {
        cleaned.remove(0);
    }
    cleaned.join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn word_counts_and_validity() {
        let f = extract_docstring_features(Some("Returns the sum of inputs."));
        assert_eq!(f.n_words, 5);
        assert!(is_valid_docstring("Returns the sum of inputs."));
        assert!(!is_valid_docstring("fix bug"));
        assert!(!is_valid_docstring("exactly three words"));
        assert!(is_valid_docstring("now exactly four words"));
    }

    #[test]
    fn vocab_is_case_insensitive() {
        let f = extract_docstring_features(Some("The the THE cat"));
        assert_eq!((f.n_words, f.vocab_size), (4, 2));
    }

    #[test]
    fn absent_docstring() {
        let f = extract_docstring_features(None);
        assert_eq!((f.n_words, f.vocab_size, f.language.as_str()), (0, 0, "en"));
    }

    #[test]
    fn language_tags() {
        assert_eq!(detect_language("Return the list of users that have been loaded."), "en");
        assert_eq!(detect_language("Devuelve la lista de usuarios que han sido cargados."), "es");
        assert_eq!(detect_language("Retourne la liste des utilisateurs qui ont été chargés."), "fr");
        assert_eq!(detect_language("Gibt die Liste der Benutzer zurück, die geladen wurden."), "de");
        assert_eq!(detect_language("1234 !!"), "en");
    }

    #[test]
    fn cleans_indentation() {
        let raw = "Summary line.\n\n        Details here.\n          indented more.\n        ";
        assert_eq!(clean_docstring(raw), "Summary line.\n\nDetails here.\n  indented more.");
    }
}
