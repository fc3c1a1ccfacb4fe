use codecause_core::features::extract_features;
use proptest::prelude::*;

fn statement() -> impl Strategy<Value = String> {
    prop_oneof![
        (0u32..1000).prop_map(|n| format!("v = a + {n}")),
        "[a-z]{1,6}".prop_map(|w| format!("{w}_x = print(a, '{w}')")),
        Just("a = [a, a * 2]".to_owned()),
        Just("# just a comment".to_owned()),
        Just("b = a.strip().lower()".to_owned()),
        (1u32..9).prop_map(|n| format!("c = {{'k': {n}}}")),
    ]
}

fn function(body: &[String]) -> String {
    let mut code = "def target(a, b=None):\n".to_owned();
    for s in body {
        code.push_str("    ");
        code.push_str(s);
        code.push('\n');
    }
    code.push_str("    return a\n");
    code
}

proptest! {
    #[test]
    fn straight_line_complexity_is_one(body in prop::collection::vec(statement(), 0..10)) {
        let f = extract_features(&function(&body), None);
        prop_assert_eq!(f.complexity, 1);
        prop_assert_eq!(f.n_ast_errors, 0);
    }

    #[test]
    fn appending_a_statement_never_shrinks(body in prop::collection::vec(statement(), 0..8), extra in statement()) {
        let before = extract_features(&function(&body), None);
        let mut longer = body.clone();
        longer.push(extra);
        let after = extract_features(&function(&longer), None);
        prop_assert!(after.nloc >= before.nloc);
        prop_assert!(after.token_count >= before.token_count);
        prop_assert!(after.n_ast_nodes >= before.n_ast_nodes);
    }

    #[test]
    fn counts_are_consistent(code in "[a-z_(): =+\\n0-9'#]{0,80}") {
        let f = extract_features(&code, None);
        prop_assert!(f.n_identifiers <= f.token_count);
        if f.n_ast_nodes >= 1 {
            prop_assert!(f.n_ast_levels >= 1);
        }
        prop_assert!(f.complexity >= 1);
    }
}

#[test]
fn decision_points_add_up() {
    let code = "def f(a, b):\n    if a and b:\n        return 1\n    return 0\n";
    assert_eq!(extract_features(code, None).complexity, 3);
}
