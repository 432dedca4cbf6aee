//! Exact decimal strings for numeric answers.

/// Canonical form of a plain decimal literal (`-?digits(.digits)?`):
/// no leading zeros in the integer part, no trailing fractional zeros,
/// no negative zero. Returns `None` for anything else.
pub fn canonical_decimal(text: &str) -> Option<String> {
    let (negative, body) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text),
    };
    let (int_part, frac_part) = match body.split_once('.') {
        Some((i, f)) => (i, f),
        None => (body, ""),
    };
    if int_part.is_empty() || !int_part.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    if body.contains('.') && (frac_part.is_empty() || !frac_part.bytes().all(|b| b.is_ascii_digit()))
    {
        return None;
    }
    let int_trimmed = int_part.trim_start_matches('0');
    let int_trimmed = if int_trimmed.is_empty() { "0" } else { int_trimmed };
    let frac_trimmed = frac_part.trim_end_matches('0');
    let is_zero = int_trimmed == "0" && frac_trimmed.is_empty();

    let mut out = String::with_capacity(text.len());
    if negative && !is_zero {
        out.push('-');
    }
    out.push_str(int_trimmed);
    if !frac_trimmed.is_empty() {
        out.push('.');
        out.push_str(frac_trimmed);
    }
    Some(out)
}

/// Numeric equality of two decimal literals, exact.
pub fn decimal_eq(a: &str, b: &str) -> bool {
    match (canonical_decimal(a), canonical_decimal(b)) {
        (Some(x), Some(y)) => x == y,
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonicalizes() {
        assert_eq!(canonical_decimal("72.0").as_deref(), Some("72"));
        assert_eq!(canonical_decimal("007").as_deref(), Some("7"));
        assert_eq!(canonical_decimal("-0.00").as_deref(), Some("0"));
        assert_eq!(canonical_decimal("-3.50").as_deref(), Some("-3.5"));
        assert_eq!(canonical_decimal("0.25").as_deref(), Some("0.25"));
        assert_eq!(canonical_decimal("1e5"), None);
        assert_eq!(canonical_decimal("3."), None);
        assert_eq!(canonical_decimal(".5"), None);
        assert_eq!(canonical_decimal(""), None);
        assert_eq!(canonical_decimal("-"), None);
    }

    #[test]
    fn equality() {
        assert!(decimal_eq("72.0", "72"));
        assert!(!decimal_eq("72.01", "72"));
        assert!(!decimal_eq("abc", "abc"));
    }
}
