//! Language identification for crawled home pages.
//!
//! The built-in detector counts stopword hits per language and picks the
//! unique best. Anything else (an external service, ground truth from a
//! simulated net) plugs in through [`LanguageDetector`].

use std::collections::HashSet;
use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::warn;

use crate::model::EepsiteId;

/// ISO-639-1 code, or `UNKNOWN` when detection was not possible.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum Language {
    Known(String),
    Unknown,
}

impl Language {
    pub const UNKNOWN_LABEL: &'static str = "UNKNOWN";

    pub fn code(code: &str) -> Self {
        Language::from(code.to_string())
    }

    pub fn as_str(&self) -> &str {
        match self {
            Language::Known(c) => c,
            Language::Unknown => Self::UNKNOWN_LABEL,
        }
    }

    pub fn is_known(&self) -> bool {
        matches!(self, Language::Known(_))
    }
}

impl From<String> for Language {
    fn from(s: String) -> Self {
        let trimmed = s.trim().to_ascii_lowercase();
        if trimmed.is_empty() || trimmed == "unknown" {
            Language::Unknown
        } else {
            Language::Known(trimmed)
        }
    }
}

impl From<Language> for String {
    fn from(l: Language) -> Self {
        l.as_str().to_string()
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error)]
#[error("language detector failed: {0}")]
pub struct DetectorFault(pub String);

pub trait LanguageDetector: Send + Sync {
    fn detect(&self, site: &EepsiteId, text: &str) -> Result<Language, DetectorFault>;
}

/// Runs `detector`, mapping empty input and detector faults to `UNKNOWN`.
pub fn detect_language(detector: &dyn LanguageDetector, site: &EepsiteId, text: &str) -> Language {
    if text.trim().is_empty() {
        return Language::Unknown;
    }
    match detector.detect(site, text) {
        Ok(lang) => lang,
        Err(fault) => {
            warn!(site = %site, error = %fault, "language detection degraded to UNKNOWN");
            Language::Unknown
        }
    }
}

/// Languages with a bundled stopword list.
pub const SUPPORTED_LANGUAGES: [&str; 12] =
    ["en", "fr", "de", "es", "no", "la", "it", "cy", "tr", "pt", "nl", "ca"];

const EN: &[&str] = &[
    "the", "and", "of", "to", "in", "is", "that", "it", "for", "was", "on", "are", "with", "as",
    "this", "be", "at", "by", "not", "from", "or", "have", "an", "they", "which", "you", "were",
    "his", "her", "but", "all", "can", "will", "there", "their", "what", "about", "more", "if",
    "has", "we", "been",
];
const FR: &[&str] = &[
    "le", "la", "les", "des", "et", "est", "une", "un", "du", "dans", "que", "qui", "pour", "pas",
    "sur", "au", "avec", "ce", "il", "sont", "plus", "par", "mais", "nous", "vous", "ou", "cette",
    "aux", "ses", "leur", "été", "être", "elle", "sans", "très",
];
const DE: &[&str] = &[
    "der", "die", "das", "und", "ist", "nicht", "ein", "eine", "zu", "den", "mit", "von", "sich",
    "auf", "für", "dem", "des", "im", "es", "auch", "als", "wird", "bei", "wir", "ich", "sie",
    "sind", "oder", "aber", "noch", "nach", "einer", "über", "kann", "wie",
];
const ES: &[&str] = &[
    "el", "la", "los", "las", "de", "que", "y", "en", "un", "una", "es", "por", "con", "para",
    "no", "se", "del", "al", "lo", "como", "más", "pero", "sus", "le", "ya", "o", "este", "sí",
    "porque", "esta", "entre", "cuando", "muy", "sin", "sobre", "también", "hay", "donde", "fue",
];
const NO: &[&str] = &[
    "og", "i", "det", "er", "på", "som", "en", "at", "til", "av", "for", "med", "ikke", "den",
    "har", "de", "om", "et", "var", "jeg", "men", "seg", "han", "kan", "vi", "så", "fra", "ut",
    "hun", "eller", "skal", "ble", "også", "hadde", "dette", "ved", "bare", "være", "når",
    "etter", "mot", "noe",
];
const LA: &[&str] = &[
    "et", "in", "est", "non", "cum", "ad", "ut", "sed", "quod", "qui", "quae", "esse", "sunt",
    "enim", "per", "ab", "ex", "nec", "atque", "autem", "tamen", "etiam", "quam", "hoc", "sic",
    "vel", "ac", "eius", "erat", "nam", "quia", "neque", "ubi", "inter", "omnia",
];
const IT: &[&str] = &[
    "il", "di", "che", "e", "la", "per", "un", "in", "non", "una", "sono", "del", "della", "con",
    "si", "le", "da", "lo", "gli", "al", "come", "ma", "più", "anche", "questo", "nel", "alla",
    "dei", "se", "ha", "sul", "perché", "molto", "tutti", "essere", "hanno",
];
const CY: &[&str] = &[
    "y", "yr", "a", "ac", "yn", "i", "o", "ar", "mae", "am", "bod", "wedi", "fel", "gan", "ei",
    "hyn", "ond", "na", "ddim", "oedd", "eu", "gyda", "hefyd", "roedd", "pan", "os", "ni", "chi",
    "nhw", "fy", "dy", "ein", "eich", "sydd", "yma", "hynny", "iawn", "mwy", "rhaid", "fod",
];
const TR: &[&str] = &[
    "ve", "bir", "bu", "da", "de", "için", "ile", "çok", "ne", "gibi", "daha", "olarak", "ama",
    "en", "o", "ki", "mi", "var", "yok", "sonra", "kadar", "her", "değil", "olan", "şey", "ben",
    "sen", "biz", "siz", "onlar", "veya", "ya", "göre", "diye", "nasıl", "neden", "ise", "hem",
];
const PT: &[&str] = &[
    "o", "a", "os", "as", "de", "que", "e", "do", "da", "em", "um", "uma", "para", "com", "não",
    "no", "na", "por", "mais", "dos", "das", "se", "como", "mas", "ao", "ele", "ela", "seu",
    "sua", "ou", "quando", "muito", "já", "também", "só", "pelo", "pela", "até", "isso", "entre",
    "são", "foi", "nos", "está",
];
const NL: &[&str] = &[
    "de", "het", "een", "en", "van", "in", "is", "dat", "op", "te", "zijn", "niet", "met", "voor",
    "die", "er", "aan", "ook", "als", "maar", "om", "bij", "of", "dan", "nog", "wel", "naar",
    "uit", "kan", "door", "over", "tot", "deze", "wordt", "hij", "zij", "wij", "geen", "heeft",
    "worden",
];
const CA: &[&str] = &[
    "el", "la", "els", "les", "de", "i", "que", "en", "un", "una", "és", "per", "amb", "no",
    "del", "al", "als", "com", "més", "però", "seu", "seva", "hi", "ho", "són", "molt", "també",
    "aquest", "aquesta", "quan", "perquè", "pel", "sobre", "entre", "fins", "havia", "està", "ser",
];

/// Bundled stopwords for a supported language code.
pub fn stopwords(code: &str) -> Option<&'static [&'static str]> {
    Some(match code {
        "en" => EN,
        "fr" => FR,
        "de" => DE,
        "es" => ES,
        "no" => NO,
        "la" => LA,
        "it" => IT,
        "cy" => CY,
        "tr" => TR,
        "pt" => PT,
        "nl" => NL,
        "ca" => CA,
        _ => return None,
    })
}

fn stopword_sets() -> &'static [(&'static str, HashSet<&'static str>)] {
    static SETS: OnceLock<Vec<(&'static str, HashSet<&'static str>)>> = OnceLock::new();
    SETS.get_or_init(|| {
        SUPPORTED_LANGUAGES
            .iter()
            .map(|code| (*code, stopwords(code).unwrap_or(&[]).iter().copied().collect()))
            .collect()
    })
}

/// Stopword-frequency heuristic over the bundled lists.
#[derive(Debug, Default, Clone, Copy)]
pub struct StopwordDetector;

impl StopwordDetector {
    /// Per-language hit counts, in [`SUPPORTED_LANGUAGES`] order.
    pub fn scores(text: &str) -> Vec<(&'static str, usize)> {
        let sets = stopword_sets();
        let mut scores: Vec<(&'static str, usize)> = sets.iter().map(|(c, _)| (*c, 0)).collect();
        for token in text.split_whitespace() {
            let word = token
                .trim_matches(|c: char| !c.is_alphabetic())
                .to_lowercase();
            if word.is_empty() {
                continue;
            }
            for (i, (_, set)) in sets.iter().enumerate() {
                if set.contains(word.as_str()) {
                    scores[i].1 += 1;
                }
            }
        }
        scores
    }
}

impl LanguageDetector for StopwordDetector {
    fn detect(&self, _site: &EepsiteId, text: &str) -> Result<Language, DetectorFault> {
        let scores = Self::scores(text);
        let best = scores.iter().map(|(_, s)| *s).max().unwrap_or(0);
        if best == 0 {
            return Ok(Language::Unknown);
        }
        let mut leaders = scores.iter().filter(|(_, s)| *s == best);
        let first = leaders.next().map(|(c, _)| *c);
        if leaders.next().is_some() {
            return Ok(Language::Unknown);
        }
        Ok(first.map(Language::code).unwrap_or(Language::Unknown))
    }
}
