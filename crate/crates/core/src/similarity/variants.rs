//! Variant generation and the hybrid similarity predicate.

use super::rules::RuleSet;

/// Up to `n` distinct variants of `password` in rule-rank order. The input
/// itself never appears in the output.
pub fn generate_variants(rules: &RuleSet, password: &str, n: usize) -> Vec<String> {
    let mut out: Vec<String> = Vec::with_capacity(n);
    if n == 0 {
        return out;
    }
    for rule in rules.rules() {
        let Some(v) = rule.apply(password) else {
            continue;
        };
        if v == password || out.contains(&v) {
            continue;
        }
        out.push(v);
        if out.len() == n {
            break;
        }
    }
    out
}

/// True when `w != w_tilde` and the client-side expansion of `w` meets the
/// server-side expansion of `w_tilde`.
pub fn hybrid_similar(
    w: &str,
    w_tilde: &str,
    server_rules: &RuleSet,
    n: usize,
    client_rules: &RuleSet,
    m: usize,
) -> bool {
    if w == w_tilde {
        return false;
    }
    let mut client = generate_variants(client_rules, w, m);
    client.push(w.to_owned());
    let mut server = generate_variants(server_rules, w_tilde, n);
    server.push(w_tilde.to_owned());
    client.iter().any(|c| server.contains(c))
}
