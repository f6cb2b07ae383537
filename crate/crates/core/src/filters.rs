//! Noise filters that separate organic symptom mentions from news-driven
//! posting: direct URLs, high-follower accounts, and outbreak keywords.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{DateRange, MessageRecord, UserProfile};
use crate::lang::Language;

/// True iff `text` contains `http://` or `https://` followed by a
/// non-whitespace character, or a `www.` (not glued to a preceding
/// alphanumeric) followed by a dot-separated host such as `example.org`.
/// Scheme and `www` are matched case-insensitively.
pub fn has_direct_url(text: &str) -> bool {
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let rest = &bytes[i..];
        for scheme in [&b"https://"[..], &b"http://"[..]] {
            if starts_with_ignore_ascii_case(rest, scheme) {
                if let Some(c) = text[i + scheme.len()..].chars().next() {
                    if !c.is_whitespace() {
                        return true;
                    }
                }
            }
        }
        if starts_with_ignore_ascii_case(rest, b"www.") {
            let glued = text[..i].chars().next_back().is_some_and(char::is_alphanumeric);
            if !glued && dotted_host(&rest[4..]) {
                return true;
            }
        }
        // advance to the next char boundary
        i += 1;
        while i < bytes.len() && !text.is_char_boundary(i) {
            i += 1;
        }
    }
    false
}

fn starts_with_ignore_ascii_case(hay: &[u8], needle: &[u8]) -> bool {
    hay.len() >= needle.len() && hay[..needle.len()].eq_ignore_ascii_case(needle)
}

/// `label ("." label)+` with labels of ASCII alphanumerics and hyphens.
fn dotted_host(s: &[u8]) -> bool {
    let is_label = |b: u8| b.is_ascii_alphanumeric() || b == b'-';
    let mut labels = 0;
    let mut i = 0;
    loop {
        let start = i;
        while i < s.len() && is_label(s[i]) {
            i += 1;
        }
        if i == start {
            return false;
        }
        labels += 1;
        if labels >= 2 {
            return true;
        }
        if i < s.len() && s[i] == b'.' {
            i += 1;
        } else {
            return false;
        }
    }
}

/// Unicode full case folding for the Latin and Greek scripts of the study
/// languages: lower-casing plus the multi-character and special foldings
/// (`ß` → `ss`, ligatures, final sigma, ...). Diacritics are kept.
pub fn fold_case(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match special_fold(c) {
            Some(rep) => out.push_str(rep),
            None => out.extend(c.to_lowercase()),
        }
    }
    out
}

fn special_fold(c: char) -> Option<&'static str> {
    Some(match c {
        '\u{00DF}' | '\u{1E9E}' => "ss",
        '\u{00B5}' => "\u{03BC}",
        '\u{017F}' => "s",
        '\u{0149}' => "\u{02BC}n",
        '\u{01F0}' => "j\u{030C}",
        '\u{0390}' => "\u{03B9}\u{0308}\u{0301}",
        '\u{03B0}' => "\u{03C5}\u{0308}\u{0301}",
        '\u{03C2}' => "\u{03C3}",
        '\u{03D0}' => "\u{03B2}",
        '\u{03D1}' => "\u{03B8}",
        '\u{03D5}' => "\u{03C6}",
        '\u{03D6}' => "\u{03C0}",
        '\u{03F0}' => "\u{03BA}",
        '\u{03F1}' => "\u{03C1}",
        '\u{03F5}' => "\u{03B5}",
        '\u{0587}' => "\u{0565}\u{0582}",
        '\u{1E96}' => "h\u{0331}",
        '\u{1E97}' => "t\u{0308}",
        '\u{1E98}' => "w\u{030A}",
        '\u{1E99}' => "y\u{030A}",
        '\u{1E9A}' => "a\u{02BE}",
        '\u{1E9B}' => "\u{1E61}",
        '\u{1FBE}' => "\u{03B9}",
        '\u{FB00}' => "ff",
        '\u{FB01}' => "fi",
        '\u{FB02}' => "fl",
        '\u{FB03}' => "ffi",
        '\u{FB04}' => "ffl",
        '\u{FB05}' | '\u{FB06}' => "st",
        _ => return None,
    })
}

/// Substring match of any keyword, on folded code points when `case_fold`.
pub fn keyword_match<S: AsRef<str>>(text: &str, keywords: &[S], case_fold: bool) -> bool {
    if case_fold {
        let hay = fold_case(text);
        keywords.iter().any(|k| hay.contains(fold_case(k.as_ref()).as_str()))
    } else {
        keywords.iter().any(|k| text.contains(k.as_ref()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rule {
    Url,
    Followers,
    Keyword,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterPolicy {
    pub url_filter: bool,
    /// Posters need strictly fewer followers than this.
    pub follower_cap: u64,
    pub keyword_filter: bool,
    pub excluded_keywords: BTreeMap<Language, Vec<String>>,
    pub case_fold: bool,
    /// Keyword exclusion only applies to messages posted inside this range.
    pub keyword_window: Option<DateRange>,
    pub rule_order: [Rule; 3],
    /// Also drop every other message of an author who posted a URL.
    pub url_drops_author: bool,
}

pub const DEFAULT_FOLLOWER_CAP: u64 = 2000;

impl Default for FilterPolicy {
    fn default() -> Self {
        FilterPolicy {
            url_filter: true,
            follower_cap: DEFAULT_FOLLOWER_CAP,
            keyword_filter: true,
            excluded_keywords: default_exclusions(),
            case_fold: true,
            keyword_window: Some(DateRange {
                start: DateRange::default().start,
                end: chrono::NaiveDate::from_ymd_opt(2020, 1, 21).unwrap(),
            }),
            rule_order: [Rule::Url, Rule::Followers, Rule::Keyword],
            url_drops_author: false,
        }
    }
}

/// Reconstructed per-language translations of "Coronavirus", "China" and
/// "COVID". Editable through the pipeline config.
pub fn default_exclusions() -> BTreeMap<Language, Vec<String>> {
    let table: [(Language, &[&str]); 7] = [
        (Language::En, &["coronavirus", "china", "covid", "wuhan"]),
        (Language::De, &["coronavirus", "china", "covid", "wuhan"]),
        (Language::Fr, &["coronavirus", "chine", "covid", "wuhan"]),
        (Language::It, &["coronavirus", "cina", "covid", "wuhan"]),
        (Language::Es, &["coronavirus", "china", "covid", "wuhan"]),
        (Language::Pl, &["koronawirus", "coronavirus", "chiny", "chinach", "chińsk", "covid", "wuhan"]),
        (Language::Nl, &["coronavirus", "china", "covid", "wuhan"]),
    ];
    table.into_iter().map(|(l, ks)| (l, ks.iter().map(|k| k.to_string()).collect())).collect()
}

impl FilterPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.follower_cap == 0 {
            return Err(Error::Policy("follower_cap must be positive".into()));
        }
        if self.keyword_filter {
            if self.excluded_keywords.values().all(Vec::is_empty) {
                return Err(Error::Policy("keyword exclusion enabled with no keywords".into()));
            }
            if self.excluded_keywords.values().flatten().any(|k| k.is_empty()) {
                return Err(Error::Policy("empty excluded keyword".into()));
            }
        }
        let mut seen = BTreeSet::new();
        for r in self.rule_order {
            if !seen.insert(r as u8) {
                return Err(Error::Policy("rule_order must list each rule once".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterStats {
    pub input_messages: u64,
    pub dropped_url: u64,
    pub dropped_followers: u64,
    pub dropped_keyword: u64,
    pub survivors_messages: u64,
    pub survivors_users: u64,
}

impl FilterStats {
    pub fn dropped(&self) -> u64 {
        self.dropped_url + self.dropped_followers + self.dropped_keyword
    }
}

/// Runs the rules in `policy.rule_order`; each dropped message is attributed
/// to the first rule that matches it. Authors missing from `users` fail the
/// follower rule.
pub fn apply_filters(
    messages: &[MessageRecord],
    users: &BTreeMap<String, UserProfile>,
    policy: &FilterPolicy,
) -> Result<(Vec<MessageRecord>, FilterStats)> {
    policy.validate()?;
    let folded: BTreeMap<Language, Vec<String>> = policy
        .excluded_keywords
        .iter()
        .map(|(l, ks)| {
            let ks = if policy.case_fold { ks.iter().map(|k| fold_case(k)).collect() } else { ks.clone() };
            (*l, ks)
        })
        .collect();
    let empty: Vec<String> = vec![];

    let url_authors: BTreeSet<&str> = if policy.url_filter && policy.url_drops_author {
        messages.iter().filter(|m| has_direct_url(&m.text)).map(|m| m.author_id.as_str()).collect()
    } else {
        BTreeSet::new()
    };

    let matches = |rule: Rule, m: &MessageRecord| -> bool {
        match rule {
            Rule::Url => policy.url_filter && (has_direct_url(&m.text) || url_authors.contains(m.author_id.as_str())),
            Rule::Followers => users.get(&m.author_id).is_none_or(|u| u.followers >= policy.follower_cap),
            Rule::Keyword => {
                if !policy.keyword_filter || policy.keyword_window.is_some_and(|w| !w.contains(m.day())) {
                    return false;
                }
                let ks = folded.get(&m.language).unwrap_or(&empty);
                if policy.case_fold {
                    let hay = fold_case(&m.text);
                    ks.iter().any(|k| hay.contains(k.as_str()))
                } else {
                    ks.iter().any(|k| m.text.contains(k.as_str()))
                }
            }
        }
    };

    let mut stats = FilterStats { input_messages: messages.len() as u64, ..FilterStats::default() };
    let mut survivors = Vec::new();
    let mut authors = BTreeSet::new();
    for m in messages {
        match policy.rule_order.iter().find(|r| matches(**r, m)) {
            Some(Rule::Url) => stats.dropped_url += 1,
            Some(Rule::Followers) => stats.dropped_followers += 1,
            Some(Rule::Keyword) => stats.dropped_keyword += 1,
            None => {
                authors.insert(m.author_id.as_str());
                survivors.push(m.clone());
            }
        }
    }
    stats.survivors_messages = survivors.len() as u64;
    stats.survivors_users = authors.len() as u64;
    Ok((survivors, stats))
}
