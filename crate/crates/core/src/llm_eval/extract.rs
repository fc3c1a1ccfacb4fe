/// The longest fenced code block of a chat response, or the whole response
/// when it has none. A language tag on the opening fence is dropped.
pub fn extract_code(response: &str) -> String {
    let parts: Vec<&str> = response.split("```").collect();
    if parts.len() < 2 {
        return response.to_owned();
    }
    let mut best: Option<&str> = None;
    for block in parts.iter().skip(1).step_by(2) {
        let body = strip_language_tag(block);
        if best.is_none_or(|b| body.len() > b.len()) {
            best = Some(body);
        }
    }
    best.unwrap_or(response).to_owned()
}

fn strip_language_tag(block: &str) -> &str {
    match block.split_once('\n') {
        Some((first, rest))
            if !first.trim().is_empty()
                && first
                    .trim()
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || matches!(c, '+' | '-' | '_' | '.')) =>
        {
            rest
        }
        Some(("", rest)) => rest,
        _ => block,
    }
}
