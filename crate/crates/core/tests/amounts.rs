use lazyk_core::constraints::{parse_amount, Locale};
use proptest::prelude::*;

/// Straightforward second parser used as the reference.
fn reference(text: &str, locale: Locale) -> Option<i64> {
    let mut s = text.trim().to_string();
    let mut neg = false;
    if s.len() >= 2 && s.starts_with('(') && s.ends_with(')') {
        neg = true;
        s = s[1..s.len() - 1].to_string();
    }
    let keep = |c: char| c.is_ascii_digit() || c == '.' || c == ',' || c == '-' || c == '+';
    let mut chars: Vec<char> = s.chars().collect();
    while chars.first().is_some_and(|&c| !keep(c)) {
        chars.remove(0);
    }
    while chars.last().is_some_and(|&c| !keep(c)) {
        chars.pop();
    }
    if let Some(&c) = chars.first() {
        if c == '-' || c == '+' {
            neg ^= c == '-';
            chars.remove(0);
            while chars.first().is_some_and(|&c| !keep(c)) {
                chars.remove(0);
            }
        }
    }
    chars.retain(|c| !c.is_whitespace() && *c != '\'');
    if chars.is_empty() || chars.iter().any(|&c| !(c.is_ascii_digit() || c == '.' || c == ',')) {
        return None;
    }
    if !chars.iter().any(char::is_ascii_digit) {
        return None;
    }
    let dots = chars.iter().filter(|&&c| c == '.').count();
    let commas = chars.iter().filter(|&&c| c == ',').count();
    let last_sep = chars.iter().rposition(|&c| c == '.' || c == ',');
    let decimal_at: Option<usize> = match last_sep {
        None => None,
        Some(p) => {
            let kind = chars[p];
            let count = if kind == '.' { dots } else { commas };
            let tail = chars.len() - p - 1;
            if dots > 0 && commas > 0 {
                if count != 1 {
                    return None;
                }
                Some(p)
            } else {
                let locale_decimal = match locale {
                    Locale::DecimalPoint => Some('.'),
                    Locale::DecimalComma => Some(','),
                    Locale::AmbiguousThousands => None,
                };
                match locale_decimal {
                    Some(d) if d == kind => {
                        if count != 1 {
                            return None;
                        }
                        Some(p)
                    }
                    Some(_) => {
                        if tail == 3 {
                            None
                        } else if count == 1 {
                            Some(p)
                        } else {
                            return None;
                        }
                    }
                    None => {
                        if count > 1 || tail == 3 {
                            None
                        } else {
                            Some(p)
                        }
                    }
                }
            }
        }
    };
    let (int, frac): (Vec<char>, Vec<char>) = match decimal_at {
        Some(p) => (chars[..p].to_vec(), chars[p + 1..].to_vec()),
        None => (chars.clone(), vec![]),
    };
    if frac.iter().any(|c| !c.is_ascii_digit()) {
        return None;
    }
    let int_str: String = int.iter().collect();
    let groups: Vec<&str> = int_str.split(['.', ',']).collect();
    if groups.len() > 1 && (groups[0].is_empty() || groups[0].len() > 3 || groups[1..].iter().any(|g| g.len() != 3)) {
        return None;
    }
    let mut units: i64 = 0;
    for g in &groups {
        for c in g.chars() {
            units = units.checked_mul(10)?.checked_add(c.to_digit(10)? as i64)?;
        }
    }
    let d = |k: usize| frac.get(k).and_then(|c| c.to_digit(10)).unwrap_or(0) as i64;
    let mut cents = units.checked_mul(100)?.checked_add(d(0) * 10 + d(1))?;
    if d(2) >= 5 {
        cents += 1;
    }
    Some(if neg { -cents } else { cents })
}

fn fixture() -> Vec<(String, Locale, Option<i64>)> {
    let text = include_str!("../../../fixtures/amounts.tsv");
    text.lines()
        .skip(1)
        .map(|line| {
            let cols: Vec<&str> = line.split('\t').collect();
            assert_eq!(cols.len(), 3, "{line:?}");
            let expected = if cols[2] == "none" { None } else { Some(cols[2].parse().unwrap()) };
            (cols[0].to_string(), cols[1].parse().unwrap(), expected)
        })
        .collect()
}

#[test]
fn fixture_table_matches_parser_and_reference() {
    let rows = fixture();
    assert!(rows.len() >= 50);
    for (text, locale, expected) in rows {
        assert_eq!(reference(&text, locale), expected, "reference on {text:?} {locale:?}");
        assert_eq!(parse_amount(&text, locale).map(|a| a.cents), expected, "{text:?} {locale:?}");
    }
}

#[test]
fn raw_text_is_kept() {
    let a = parse_amount(" Rp 56.000 ", Locale::AmbiguousThousands).unwrap();
    assert_eq!(a.raw, " Rp 56.000 ");
    assert_eq!(a.units(), 56000.0);
}

fn amountish() -> impl Strategy<Value = String> {
    let piece = prop_oneof![
        4 => "[0-9]{1,4}",
        2 => Just(".".to_string()),
        2 => Just(",".to_string()),
        1 => Just(" ".to_string()),
        1 => Just("-".to_string()),
        1 => Just("Rp".to_string()),
        1 => Just("$".to_string()),
    ];
    prop::collection::vec(piece, 1..6).prop_map(|v| v.concat())
}

fn locale() -> impl Strategy<Value = Locale> {
    prop_oneof![Just(Locale::AmbiguousThousands), Just(Locale::DecimalPoint), Just(Locale::DecimalComma)]
}

proptest! {
    #[test]
    fn agrees_with_reference(text in amountish(), locale in locale()) {
        prop_assert_eq!(parse_amount(&text, locale).map(|a| a.cents), reference(&text, locale));
    }

    #[test]
    fn reparsing_raw_text_is_stable(text in amountish(), locale in locale()) {
        if let Some(a) = parse_amount(&text, locale) {
            prop_assert_eq!(parse_amount(&a.raw, locale).map(|b| b.cents), Some(a.cents));
        }
    }
}
