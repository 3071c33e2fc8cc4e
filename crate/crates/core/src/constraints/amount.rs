//! Parsing printed amounts into integer minor units (hundredths).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// How a lone separator followed by exactly three digits is read
/// (`"56.000"`, `"1,500"`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Locale {
    /// Either separator followed by a 3-digit group is a thousands separator.
    #[default]
    AmbiguousThousands,
    /// `.` is the decimal mark, `,` groups thousands.
    DecimalPoint,
    /// `,` is the decimal mark, `.` groups thousands.
    DecimalComma,
}

impl FromStr for Locale {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ambiguous-thousands" => Ok(Locale::AmbiguousThousands),
            "decimal-point" => Ok(Locale::DecimalPoint),
            "decimal-comma" => Ok(Locale::DecimalComma),
            _ => Err(format!("unknown locale {s:?}")),
        }
    }
}

/// A parsed amount in hundredths of the currency unit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Amount {
    pub cents: i64,
    pub raw: String,
}

impl Amount {
    pub fn units(&self) -> f64 {
        self.cents as f64 / 100.0
    }
}

impl fmt::Display for Amount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.cents < 0 { "-" } else { "" };
        let c = self.cents.unsigned_abs();
        write!(f, "{sign}{}.{:02}", c / 100, c % 100)
    }
}

fn is_separator(c: char) -> bool {
    c == '.' || c == ','
}

/// Parses a printed amount. Returns `None` for anything that is not a number.
///
/// Leading and trailing currency markers (`Rp`, `$`, `EUR`, ...) and
/// whitespace are ignored. A leading `-` or surrounding parentheses make the
/// amount negative. Digits past the second decimal are rounded half away
/// from zero.
pub fn parse_amount(text: &str, locale: Locale) -> Option<Amount> {
    let raw = text.to_string();
    let mut s: &str = text.trim();
    let mut negative = false;
    if s.starts_with('(') && s.ends_with(')') && s.len() >= 2 {
        negative = true;
        s = &s[1..s.len() - 1];
    }
    let is_marker = |c: char| !(c.is_ascii_digit() || is_separator(c) || c == '-' || c == '+');
    s = s.trim_matches(is_marker);
    if let Some(rest) = s.strip_prefix('-') {
        negative = !negative;
        s = rest.trim_start_matches(is_marker);
    } else if let Some(rest) = s.strip_prefix('+') {
        s = rest.trim_start_matches(is_marker);
    }
    // Whitespace inside the number is tolerated as digit grouping ("1 000").
    let body: String = s.chars().filter(|c| !c.is_whitespace() && *c != '\'').collect();
    if body.is_empty() || !body.chars().all(|c| c.is_ascii_digit() || is_separator(c)) {
        return None;
    }
    if !body.chars().any(|c| c.is_ascii_digit()) {
        return None;
    }

    let decimal = decimal_mark(&body, locale)?;
    let (int_part, frac_part) = match decimal {
        Some(pos) => (&body[..pos], &body[pos + 1..]),
        None => (&body[..], ""),
    };
    if !frac_part.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    if !valid_grouping(int_part) {
        return None;
    }
    let int_digits: String = int_part.chars().filter(|c| c.is_ascii_digit()).collect();

    let mut cents: i64 = 0;
    for d in int_digits.bytes() {
        cents = cents.checked_mul(10)?.checked_add((d - b'0') as i64)?;
    }
    cents = cents.checked_mul(100)?;
    let frac = frac_part.as_bytes();
    let digit = |k: usize| frac.get(k).map(|d| (d - b'0') as i64).unwrap_or(0);
    cents = cents.checked_add(digit(0) * 10 + digit(1))?;
    if digit(2) >= 5 {
        cents = cents.checked_add(1)?;
    }
    Some(Amount { cents: if negative { -cents } else { cents }, raw })
}

/// Byte position of the decimal mark, `Some(None)` when there is none and
/// `None` when the separators are inconsistent.
fn decimal_mark(body: &str, locale: Locale) -> Option<Option<usize>> {
    let seps: Vec<(usize, char)> = body.char_indices().filter(|&(_, c)| is_separator(c)).collect();
    let Some(&(last_pos, last)) = seps.last() else {
        return Some(None);
    };
    let kinds_differ = seps.iter().any(|&(_, c)| c != last);
    if kinds_differ {
        // The rightmost separator is the decimal mark; it must appear once.
        return if seps.iter().filter(|&&(_, c)| c == last).count() == 1 { Some(Some(last_pos)) } else { None };
    }
    let tail_len = body.len() - last_pos - 1;
    match (locale, last) {
        (Locale::DecimalPoint, '.') | (Locale::DecimalComma, ',') => {
            if seps.len() == 1 {
                Some(Some(last_pos))
            } else {
                None
            }
        }
        (Locale::DecimalPoint, ',') | (Locale::DecimalComma, '.') => {
            if tail_len == 3 {
                Some(None)
            } else if seps.len() == 1 {
                Some(Some(last_pos))
            } else {
                None
            }
        }
        (Locale::AmbiguousThousands, _) => {
            if seps.len() > 1 || tail_len == 3 {
                Some(None)
            } else {
                Some(Some(last_pos))
            }
        }
        _ => unreachable!(),
    }
}

/// Thousands groups after the first must be exactly three digits.
fn valid_grouping(int_part: &str) -> bool {
    let groups: Vec<&str> = int_part.split(is_separator).collect();
    if groups.len() == 1 {
        return true;
    }
    !groups[0].is_empty() && groups[0].len() <= 3 && groups[1..].iter().all(|g| g.len() == 3)
}
