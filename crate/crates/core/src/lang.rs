//! The seven study languages and the countries they are anchored to.

use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    En,
    De,
    Fr,
    It,
    Es,
    Pl,
    Nl,
}

impl Language {
    pub const ALL: [Language; 7] =
        [Language::En, Language::De, Language::Fr, Language::It, Language::Es, Language::Pl, Language::Nl];

    pub fn code(self) -> &'static str {
        match self {
            Language::En => "en",
            Language::De => "de",
            Language::Fr => "fr",
            Language::It => "it",
            Language::Es => "es",
            Language::Pl => "pl",
            Language::Nl => "nl",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        Language::ALL.into_iter().find(|l| l.code() == code)
    }

    /// Country whose messages are counted when a poster cannot be placed.
    pub fn home_country(self) -> Country {
        match self {
            Language::En => Country::GB,
            Language::De => Country::DE,
            Language::Fr => Country::FR,
            Language::It => Country::IT,
            Language::Es => Country::ES,
            Language::Pl => Country::PL,
            Language::Nl => Country::NL,
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Language {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        Language::from_code(s).ok_or(())
    }
}

/// Study countries, by ISO 3166-1 alpha-2 code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Country {
    GB,
    DE,
    FR,
    IT,
    ES,
    PL,
    NL,
}

impl Country {
    pub const ALL: [Country; 7] =
        [Country::FR, Country::DE, Country::IT, Country::NL, Country::PL, Country::ES, Country::GB];

    pub fn code(self) -> &'static str {
        match self {
            Country::GB => "GB",
            Country::DE => "DE",
            Country::FR => "FR",
            Country::IT => "IT",
            Country::ES => "ES",
            Country::PL => "PL",
            Country::NL => "NL",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        match code {
            "UK" => Some(Country::GB),
            _ => Country::ALL.into_iter().find(|c| c.code() == code),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Country::GB => "United Kingdom",
            Country::DE => "Germany",
            Country::FR => "France",
            Country::IT => "Italy",
            Country::ES => "Spain",
            Country::PL => "Poland",
            Country::NL => "The Netherlands",
        }
    }
}

impl fmt::Display for Country {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}
