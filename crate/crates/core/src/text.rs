//! String normalization shared by matching, overrides and invoice keys.

/// Case-folds, replaces punctuation with spaces and collapses whitespace.
///
/// Alphanumeric characters are kept as-is (after lowercasing); everything
/// else acts as a word separator.
pub fn normalize(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut pending_space = false;
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            out.extend(ch.to_lowercase());
        } else {
            pending_space = true;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folds_case_and_punctuation() {
        assert_eq!(normalize("  Chicken,  Breast (raw) "), "chicken breast raw");
        assert_eq!(normalize("MILK"), "milk");
        assert_eq!(normalize("Coriander & Annatto"), "coriander annatto");
        assert_eq!(normalize("?!"), "");
    }

    #[test]
    fn idempotent() {
        for s in ["Whole Milk, 3.25%", "  a\tb\nc ", "Jalapeño-peppers"] {
            let once = normalize(s);
            assert_eq!(normalize(&once), once);
        }
    }
}
