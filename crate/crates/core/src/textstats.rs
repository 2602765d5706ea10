//! Character-class statistics and the additive heuristic noise penalty.
//!
//! The penalty is the rule-based half of the line-quality score: six
//! surface conditions, each firing at most once per line and contributing
//! a fixed increment from the config. It is deliberately not a language
//! identifier; it exists to demote obvious non-linguistic noise while the
//! embedding similarity handles the semantic half.

use serde::{Deserialize, Serialize};
use unicode_properties::{GeneralCategory, GeneralCategoryGroup, UnicodeGeneralCategory};

/// Disjoint character classes. Every scalar value maps to exactly one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CharClass {
    Arabic,
    Latin,
    Digit,
    Punct,
    Whitespace,
    Other,
}

/// Classifies one character.
///
/// Precedence: whitespace, then punctuation (general category P), then
/// decimal digits (Nd), then the Arabic script blocks, then Latin letters.
/// Category checks run before the block ranges so that Arabic punctuation
/// (e.g. U+060C) counts as punctuation and Arabic-Indic digits as digits.
pub fn classify(c: char) -> CharClass {
    if c.is_whitespace() {
        CharClass::Whitespace
    } else if c.general_category_group() == GeneralCategoryGroup::Punctuation {
        CharClass::Punct
    } else if c.general_category() == GeneralCategory::DecimalNumber {
        CharClass::Digit
    } else if is_arabic_block(c) {
        CharClass::Arabic
    } else if is_latin_letter(c) {
        CharClass::Latin
    } else {
        CharClass::Other
    }
}

/// Arabic, Arabic Supplement, Arabic Extended-A, and the presentation-form
/// blocks: the repertoire Urdu text draws from.
fn is_arabic_block(c: char) -> bool {
    matches!(c,
        '\u{0600}'..='\u{06FF}'
        | '\u{0750}'..='\u{077F}'
        | '\u{08A0}'..='\u{08FF}'
        | '\u{FB50}'..='\u{FDFF}'
        | '\u{FE70}'..='\u{FEFF}')
}

/// ASCII letters plus Latin-1 Supplement and Latin Extended letters.
fn is_latin_letter(c: char) -> bool {
    c.is_ascii_alphabetic() || (matches!(c, '\u{00C0}'..='\u{024F}') && c.is_alphabetic())
}

/// Raw per-class character counts. Additive under concatenation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CharClassCounts {
    pub arabic: usize,
    pub latin: usize,
    pub digit: usize,
    pub punct: usize,
    pub whitespace: usize,
    pub other: usize,
}

impl CharClassCounts {
    pub fn total(&self) -> usize {
        self.arabic + self.latin + self.digit + self.punct + self.whitespace + self.other
    }

    pub fn add(&mut self, other: &CharClassCounts) {
        self.arabic += other.arabic;
        self.latin += other.latin;
        self.digit += other.digit;
        self.punct += other.punct;
        self.whitespace += other.whitespace;
        self.other += other.other;
    }

    pub fn profile(&self) -> CharClassProfile {
        let total = self.total();
        if total == 0 {
            return CharClassProfile::default();
        }
        let ratio = |n: usize| n as f64 / total as f64;
        CharClassProfile {
            total_chars: total,
            arabic_ratio: ratio(self.arabic),
            latin_ratio: ratio(self.latin),
            digit_ratio: ratio(self.digit),
            punct_ratio: ratio(self.punct),
            whitespace_ratio: ratio(self.whitespace),
            other_ratio: ratio(self.other),
        }
    }
}

/// Class ratios over a text. All ratios are 0 for empty text; otherwise
/// they sum to 1 within floating-point error.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CharClassProfile {
    pub total_chars: usize,
    pub arabic_ratio: f64,
    pub latin_ratio: f64,
    pub digit_ratio: f64,
    pub punct_ratio: f64,
    pub whitespace_ratio: f64,
    pub other_ratio: f64,
}

pub fn char_counts(text: &str) -> CharClassCounts {
    let mut counts = CharClassCounts::default();
    for c in text.chars() {
        match classify(c) {
            CharClass::Arabic => counts.arabic += 1,
            CharClass::Latin => counts.latin += 1,
            CharClass::Digit => counts.digit += 1,
            CharClass::Punct => counts.punct += 1,
            CharClass::Whitespace => counts.whitespace += 1,
            CharClass::Other => counts.other += 1,
        }
    }
    counts
}

pub fn char_profile(text: &str) -> CharClassProfile {
    char_counts(text).profile()
}

/// The six penalty conditions, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    ShortLength,
    LowArabic,
    HighForeign,
    LeadingPunct,
    RepeatedSymbols,
    Boilerplate,
}

impl Condition {
    pub const ALL: [Condition; 6] = [
        Condition::ShortLength,
        Condition::LowArabic,
        Condition::HighForeign,
        Condition::LeadingPunct,
        Condition::RepeatedSymbols,
        Condition::Boilerplate,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Condition::ShortLength => "short_length",
            Condition::LowArabic => "low_arabic",
            Condition::HighForeign => "high_foreign",
            Condition::LeadingPunct => "leading_punct",
            Condition::RepeatedSymbols => "repeated_symbols",
            Condition::Boilerplate => "boilerplate",
        }
    }
}

/// One fixed increment per condition. Defaults sum to 1.9, making that the
/// hard maximum of the default penalty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PenaltyIncrements {
    pub short_length: f64,
    pub low_arabic: f64,
    pub high_foreign: f64,
    pub leading_punct: f64,
    pub repeated_symbols: f64,
    pub boilerplate: f64,
}

impl Default for PenaltyIncrements {
    fn default() -> Self {
        PenaltyIncrements {
            short_length: 0.4,
            low_arabic: 0.5,
            high_foreign: 0.4,
            leading_punct: 0.2,
            repeated_symbols: 0.2,
            boilerplate: 0.2,
        }
    }
}

impl PenaltyIncrements {
    pub fn get(&self, c: Condition) -> f64 {
        match c {
            Condition::ShortLength => self.short_length,
            Condition::LowArabic => self.low_arabic,
            Condition::HighForeign => self.high_foreign,
            Condition::LeadingPunct => self.leading_punct,
            Condition::RepeatedSymbols => self.repeated_symbols,
            Condition::Boilerplate => self.boilerplate,
        }
    }

    pub fn sum(&self) -> f64 {
        Condition::ALL.iter().map(|c| self.get(*c)).sum()
    }
}

/// Thresholds and increments for the penalty. Length is counted in
/// characters, not bytes, so Urdu and Latin text are measured alike.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PenaltyConfig {
    pub min_length_chars: usize,
    pub arabic_ratio_floor: f64,
    pub latin_ratio_ceil: f64,
    pub digit_ratio_ceil: f64,
    pub punct_ratio_ceil: f64,
    pub repeat_run_length: usize,
    pub boilerplate_patterns: Vec<String>,
    pub increments: PenaltyIncrements,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        PenaltyConfig {
            min_length_chars: 20,
            arabic_ratio_floor: 0.5,
            latin_ratio_ceil: 0.3,
            digit_ratio_ceil: 0.3,
            punct_ratio_ceil: 0.3,
            repeat_run_length: 4,
            boilerplate_patterns: default_boilerplate_patterns(),
            increments: PenaltyIncrements::default(),
        }
    }
}

/// Literals matching the artifact families that dominate low-scoring web
/// lines: navigation fragments, URLs, timestamp separators, and licensing
/// or newsroom metadata.
fn default_boilerplate_patterns() -> Vec<String> {
    [
        "Read more",
        "مزید پڑھیں",
        "::",
        "http://",
        "https://",
        "www.",
        "Click here",
        "Copyright",
        "©",
        "All rights reserved",
        "Posted on",
        "Tags:",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

impl PenaltyConfig {
    pub fn validate(&self) -> crate::Result<()> {
        for c in Condition::ALL {
            if self.increments.get(c) < 0.0 || !self.increments.get(c).is_finite() {
                return Err(crate::Error::Config(format!(
                    "penalty increment {} must be finite and non-negative",
                    c.name()
                )));
            }
        }
        if self.boilerplate_patterns.iter().any(|p| p.is_empty()) {
            return Err(crate::Error::Config(
                "empty boilerplate pattern matches everything".into(),
            ));
        }
        if self.repeat_run_length < 2 {
            return Err(crate::Error::Config(
                "repeat_run_length must be at least 2".into(),
            ));
        }
        Ok(())
    }
}

/// Which conditions fired and what each contributed. `total` is their sum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PenaltyBreakdown {
    pub per_condition: Vec<(Condition, f64)>,
    pub total: f64,
}

impl PenaltyBreakdown {
    pub fn fired(&self, c: Condition) -> bool {
        self.per_condition.iter().any(|(fc, _)| *fc == c)
    }
}

/// Evaluates all six conditions on one line. Each fires at most once and
/// contributes its full increment or nothing.
pub fn penalty(text: &str, config: &PenaltyConfig) -> PenaltyBreakdown {
    let profile = char_profile(text);
    let mut per_condition = Vec::new();
    let mut total = 0.0;
    let mut fire = |c: Condition| {
        let inc = config.increments.get(c);
        per_condition.push((c, inc));
        total += inc;
    };

    if profile.total_chars < config.min_length_chars {
        fire(Condition::ShortLength);
    }
    if profile.arabic_ratio < config.arabic_ratio_floor {
        fire(Condition::LowArabic);
    }
    if profile.latin_ratio > config.latin_ratio_ceil
        || profile.digit_ratio > config.digit_ratio_ceil
        || profile.punct_ratio > config.punct_ratio_ceil
    {
        fire(Condition::HighForeign);
    }
    if let Some(first) = text.chars().find(|c| !c.is_whitespace()) {
        if classify(first) == CharClass::Punct {
            fire(Condition::LeadingPunct);
        }
    }
    if has_repeat_run(text, config.repeat_run_length) {
        fire(Condition::RepeatedSymbols);
    }
    if config
        .boilerplate_patterns
        .iter()
        .any(|p| !p.is_empty() && text.contains(p.as_str()))
    {
        fire(Condition::Boilerplate);
    }

    PenaltyBreakdown {
        per_condition,
        total,
    }
}

/// True when some non-whitespace character repeats `run` or more times
/// consecutively.
fn has_repeat_run(text: &str, run: usize) -> bool {
    if run == 0 {
        return true;
    }
    let mut prev: Option<char> = None;
    let mut len = 0usize;
    for c in text.chars() {
        if c.is_whitespace() {
            prev = None;
            len = 0;
            continue;
        }
        if Some(c) == prev {
            len += 1;
        } else {
            prev = Some(c);
            len = 1;
        }
        if len >= run {
            return true;
        }
    }
    false
}
