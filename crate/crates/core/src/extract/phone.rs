//! Country-aware phone normalization to E.164.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

const BUNDLED: &str = include_str!("../../data/phone_rules.json");

/// Digits required before any interpretation is attempted.
pub const MIN_DIGITS: usize = 7;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountryPhoneRule {
    pub country: String,
    pub calling_code: String,
    #[serde(default)]
    pub trunk_prefix: Option<String>,
    pub national_lengths: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PhoneError {
    #[error("invalid character `{0}` in phone number")]
    InvalidCharacter(char),
    #[error("length validation failed under rule {rule}: {digits} digits, allowed {allowed:?}")]
    Length {
        rule: String,
        digits: usize,
        allowed: Vec<usize>,
    },
    #[error("country indeterminate")]
    CountryIndeterminate,
    #[error("no phone rule for country `{0}`")]
    UnknownCountry(String),
}

#[derive(Debug, thiserror::Error)]
pub enum PhoneRulesError {
    #[error("phone rules are not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("rule {country}: {reason}")]
    Invalid { country: String, reason: &'static str },
}

#[derive(Debug, Clone)]
pub struct PhoneRules {
    by_country: BTreeMap<String, CountryPhoneRule>,
}

impl PhoneRules {
    pub fn from_json(json: &str) -> Result<Self, PhoneRulesError> {
        let rules: Vec<CountryPhoneRule> = serde_json::from_str(json)?;
        Self::from_rules(rules)
    }

    pub fn from_rules(rules: Vec<CountryPhoneRule>) -> Result<Self, PhoneRulesError> {
        let mut by_country = BTreeMap::new();
        for r in rules {
            let bad = |reason| PhoneRulesError::Invalid {
                country: r.country.clone(),
                reason,
            };
            if r.calling_code.is_empty()
                || r.calling_code.len() > 3
                || !r.calling_code.bytes().all(|b| b.is_ascii_digit())
            {
                return Err(bad("calling_code must be 1-3 digits"));
            }
            if r.national_lengths.is_empty() {
                return Err(bad("national_lengths must not be empty"));
            }
            if r
                .trunk_prefix
                .as_ref()
                .is_some_and(|t| t.is_empty() || !t.bytes().all(|b| b.is_ascii_digit()))
            {
                return Err(bad("trunk_prefix must be digits"));
            }
            by_country.insert(r.country.clone(), r);
        }
        Ok(PhoneRules { by_country })
    }

    pub fn bundled() -> &'static PhoneRules {
        static RULES: OnceLock<PhoneRules> = OnceLock::new();
        RULES.get_or_init(|| PhoneRules::from_json(BUNDLED).expect("bundled phone rules are valid"))
    }

    /// Merge extra rules over this set (later entries win per country).
    pub fn extended(&self, extra: Vec<CountryPhoneRule>) -> Result<Self, PhoneRulesError> {
        let mut all: Vec<_> = self.by_country.values().cloned().collect();
        all.extend(extra);
        Self::from_rules(all)
    }

    pub fn rule(&self, country: &str) -> Option<&CountryPhoneRule> {
        self.by_country.get(country)
    }

    pub fn rules(&self) -> impl Iterator<Item = &CountryPhoneRule> {
        self.by_country.values()
    }

    /// The rule whose calling code is the longest prefix of `digits`.
    fn rule_for_international(&self, digits: &str) -> Option<&CountryPhoneRule> {
        self.by_country
            .values()
            .filter(|r| digits.starts_with(&r.calling_code))
            .max_by_key(|r| r.calling_code.len())
    }

    /// Normalize `raw` to `+<digits>`.
    ///
    /// An explicit `+` or `00` prefix decides the country; otherwise
    /// `country_hint` does and its trunk prefix is stripped.
    pub fn normalize(&self, raw: &str, country_hint: Option<&str>) -> Result<String, PhoneError> {
        let trimmed = raw.trim();
        let international_form = trimmed.starts_with('+') || trimmed.starts_with("00");
        let cleaned = if international_form {
            trimmed.replace("(0)", "")
        } else {
            trimmed.to_string()
        };
        let mut plus = false;
        let mut digits = String::new();
        for (i, c) in cleaned.chars().enumerate() {
            match c {
                '+' if i == 0 => plus = true,
                '0'..='9' => digits.push(c),
                ' ' | '-' | '/' | '.' | '(' | ')' | '\u{a0}' | '\t' => {}
                other => return Err(PhoneError::InvalidCharacter(other)),
            }
        }
        if digits.len() < MIN_DIGITS {
            return Err(PhoneError::Length {
                rule: country_hint.unwrap_or("minimum").to_string(),
                digits: digits.len(),
                allowed: vec![],
            });
        }
        let international = if plus {
            Some(digits.as_str())
        } else {
            digits.strip_prefix("00")
        };
        let (rule, national) = match international {
            Some(intl) => {
                let rule = self
                    .rule_for_international(intl)
                    .ok_or(PhoneError::CountryIndeterminate)?;
                (rule, intl[rule.calling_code.len()..].to_string())
            }
            None => {
                let hint = country_hint.ok_or(PhoneError::CountryIndeterminate)?;
                let rule = self
                    .rule(hint)
                    .ok_or_else(|| PhoneError::UnknownCountry(hint.to_string()))?;
                let national = match &rule.trunk_prefix {
                    Some(t) => digits.strip_prefix(t.as_str()).unwrap_or(&digits),
                    None => &digits,
                };
                (rule, national.to_string())
            }
        };
        if !rule.national_lengths.contains(&national.len()) {
            return Err(PhoneError::Length {
                rule: rule.country.clone(),
                digits: national.len(),
                allowed: rule.national_lengths.clone(),
            });
        }
        Ok(format!("+{}{}", rule.calling_code, national))
    }

    /// Country of an E.164 number under these rules.
    pub fn country_of(&self, e164: &str) -> Option<&str> {
        let digits = e164.strip_prefix('+')?;
        self.rule_for_international(digits).map(|r| r.country.as_str())
    }
}

/// Normalize against the bundled rule set.
pub fn normalize_phone(raw: &str, country_hint: Option<&str>) -> Result<String, PhoneError> {
    PhoneRules::bundled().normalize(raw, country_hint)
}

/// A phone number found in running text. Offsets are in chars.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhoneMatch {
    pub start: usize,
    pub end: usize,
    pub raw: String,
    pub e164: String,
}

fn candidate_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?:\+|\b00)?\(?\d[\d \t\-/.()\x{a0}]{5,}\d").expect("static regex")
    })
}

fn byte_to_char(text: &str, byte: usize) -> usize {
    text[..byte].chars().count()
}

/// Find phone numbers in text that normalize under `rules`.
///
/// Fax lines are skipped, and a number without an international prefix must
/// carry the hint country's trunk prefix, which rules out dates and
/// reference numbers.
pub fn find_phone_numbers(text: &str, rules: &PhoneRules, country_hint: Option<&str>) -> Vec<PhoneMatch> {
    let mut out = Vec::new();
    for m in candidate_re().find_iter(text) {
        let raw = m.as_str().trim();
        let line_start = text[..m.start()].rfind('\n').map_or(0, |i| i + 1);
        let prefix = text[line_start..m.start()].to_lowercase();
        if prefix.contains("fax") {
            continue;
        }
        let international = raw.starts_with('+') || raw.starts_with("00");
        if !international {
            let trunk = country_hint
                .and_then(|h| rules.rule(h))
                .and_then(|r| r.trunk_prefix.clone());
            let leading: String = raw.chars().filter(|c| c.is_ascii_digit()).take(1).collect();
            match trunk {
                Some(t) if t != "1" && !leading.starts_with(&t) => continue,
                _ => {}
            }
        }
        if let Ok(e164) = rules.normalize(raw, country_hint) {
            let start = byte_to_char(text, m.start());
            out.push(PhoneMatch {
                start,
                end: start + m.as_str().chars().count(),
                raw: raw.to_string(),
                e164,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn swiss_examples() {
        assert_eq!(normalize_phone("+41 81 286 24 24", None).unwrap(), "+41812862424");
        assert_eq!(normalize_phone("081 286 24 24", Some("CH")).unwrap(), "+41812862424");
        assert!(matches!(
            normalize_phone("12345", Some("CH")),
            Err(PhoneError::Length { .. })
        ));
    }

    #[test]
    fn double_zero_and_parenthesized_trunk() {
        assert_eq!(normalize_phone("0041 81 286 24 24", None).unwrap(), "+41812862424");
        assert_eq!(normalize_phone("+41 (0)81 286 24 24", None).unwrap(), "+41812862424");
        assert_eq!(normalize_phone("(0)81 286-24-24", Some("CH")).unwrap(), "+41812862424");
    }

    #[test]
    fn errors() {
        assert_eq!(
            normalize_phone("081 286 24 24", None),
            Err(PhoneError::CountryIndeterminate)
        );
        assert_eq!(
            normalize_phone("+999 1234 5678", None),
            Err(PhoneError::CountryIndeterminate)
        );
        assert!(matches!(
            normalize_phone("081 286 24 24", Some("JP")),
            Err(PhoneError::UnknownCountry(_))
        ));
        assert!(matches!(
            normalize_phone("081 286 24 24 ext 5", Some("CH")),
            Err(PhoneError::InvalidCharacter('e'))
        ));
        match normalize_phone("+41 81 286 24 2", None) {
            Err(PhoneError::Length { rule, .. }) => assert_eq!(rule, "CH"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn us_trunk_prefix() {
        assert_eq!(normalize_phone("(617) 555-0134", Some("US")).unwrap(), "+16175550134");
        assert_eq!(normalize_phone("1-617-555-0134", Some("US")).unwrap(), "+16175550134");
    }

    #[test]
    fn rule_validation() {
        let bad = r#"[{"country":"XX","calling_code":"1234","national_lengths":[9]}]"#;
        assert!(PhoneRules::from_json(bad).is_err());
        let bad = r#"[{"country":"XX","calling_code":"12","national_lengths":[]}]"#;
        assert!(PhoneRules::from_json(bad).is_err());
    }

    #[test]
    fn finds_numbers_skipping_fax_and_dates() {
        let text = "Contact\nTel: +41 81 286 24 24\nFax: +41 81 286 24 25\nUpdated 2024-01-15\nHotline 044 500 12 34";
        let found = find_phone_numbers(text, PhoneRules::bundled(), Some("CH"));
        let nums: Vec<_> = found.iter().map(|m| m.e164.as_str()).collect();
        assert_eq!(nums, ["+41812862424", "+41445001234"]);
        let m = &found[0];
        assert_eq!(crate::extract::fold::char_slice(text, m.start, m.end), "+41 81 286 24 24");
    }
}
