use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::corpus::{LanguageCode, LanguageRegistry, ResourceClass};

/// Policy choosing the languages of the demonstrations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum IclMode {
    English,
    Monolingual(LanguageCode),
    Multilingual,
    Native,
}

/// Context-irrelevant sentences prepended to demonstrations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CisMode {
    NoCis,
    CisMono(LanguageCode),
    CisMulti,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TranslationStrategy {
    NoTranslation,
    /// Test question translated into English, English demonstrations.
    ToEnglish,
    /// English demonstrations translated into the test language.
    FromEnglish,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("invalid mode `{0}`")]
pub struct ModeParseError(pub String);

impl fmt::Display for IclMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IclMode::English => f.write_str("english"),
            IclMode::Monolingual(l) => write!(f, "mono-{l}"),
            IclMode::Multilingual => f.write_str("multilingual"),
            IclMode::Native => f.write_str("native"),
        }
    }
}

impl FromStr for IclMode {
    type Err = ModeParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ModeParseError(s.to_string());
        Ok(match s {
            "english" => IclMode::English,
            "multilingual" => IclMode::Multilingual,
            "native" => IclMode::Native,
            _ => {
                let code = s.strip_prefix("mono-").ok_or_else(err)?;
                IclMode::Monolingual(LanguageCode::new(code).map_err(|_| err())?)
            }
        })
    }
}

impl fmt::Display for CisMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CisMode::NoCis => f.write_str("none"),
            CisMode::CisMono(l) => write!(f, "cis-{l}"),
            CisMode::CisMulti => f.write_str("cis-multi"),
        }
    }
}

impl FromStr for CisMode {
    type Err = ModeParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ModeParseError(s.to_string());
        Ok(match s {
            "none" => CisMode::NoCis,
            "cis-multi" => CisMode::CisMulti,
            _ => {
                let code = s.strip_prefix("cis-").ok_or_else(err)?;
                CisMode::CisMono(LanguageCode::new(code).map_err(|_| err())?)
            }
        })
    }
}

impl fmt::Display for TranslationStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TranslationStrategy::NoTranslation => "none",
            TranslationStrategy::ToEnglish => "to-en",
            TranslationStrategy::FromEnglish => "from-en",
        })
    }
}

impl FromStr for TranslationStrategy {
    type Err = ModeParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(TranslationStrategy::NoTranslation),
            "to-en" => Ok(TranslationStrategy::ToEnglish),
            "from-en" => Ok(TranslationStrategy::FromEnglish),
            _ => Err(ModeParseError(s.to_string())),
        }
    }
}

macro_rules! string_serde {
    ($t:ty) => {
        impl Serialize for $t {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $t {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

string_serde!(IclMode);
string_serde!(CisMode);
string_serde!(TranslationStrategy);
string_serde!(ModeDescriptor);

/// One experimental condition: ICL mode, CIS mode and translation strategy.
///
/// Written as `icl[+cis][+translation]`, e.g. `english`, `mono-zh`,
/// `english+cis-multi`, `multilingual+cis-multi`, `english+to-en`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ModeDescriptor {
    pub icl: IclMode,
    pub cis: CisMode,
    pub translation: TranslationStrategy,
}

impl ModeDescriptor {
    pub fn icl(icl: IclMode) -> Self {
        ModeDescriptor {
            icl,
            cis: CisMode::NoCis,
            translation: TranslationStrategy::NoTranslation,
        }
    }

    /// Checks the combination is constructible: translation only on top of
    /// plain English ICL, and a monolingual language must be high-resource.
    pub fn validate(&self, registry: &LanguageRegistry) -> Result<(), ModeParseError> {
        if self.translation != TranslationStrategy::NoTranslation
            && (self.icl != IclMode::English || self.cis != CisMode::NoCis)
        {
            return Err(ModeParseError(format!(
                "{self}: translation strategies apply to the plain English mode only"
            )));
        }
        if let IclMode::Monolingual(l) = self.icl {
            if registry.resource_class(l) != ResourceClass::Hrl {
                return Err(ModeParseError(format!("{self}: `{l}` is not a high-resource language")));
            }
        }
        Ok(())
    }
}

impl fmt::Display for ModeDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.icl)?;
        if self.cis != CisMode::NoCis {
            write!(f, "+{}", self.cis)?;
        }
        if self.translation != TranslationStrategy::NoTranslation {
            write!(f, "+{}", self.translation)?;
        }
        Ok(())
    }
}

impl FromStr for ModeDescriptor {
    type Err = ModeParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.split('+');
        let icl: IclMode = parts.next().unwrap_or_default().parse()?;
        let mut mode = ModeDescriptor::icl(icl);
        for part in parts {
            if let Ok(t) = part.parse::<TranslationStrategy>() {
                if mode.translation != TranslationStrategy::NoTranslation || t == TranslationStrategy::NoTranslation {
                    return Err(ModeParseError(s.to_string()));
                }
                mode.translation = t;
            } else {
                let cis: CisMode = part.parse().map_err(|_| ModeParseError(s.to_string()))?;
                if mode.cis != CisMode::NoCis || cis == CisMode::NoCis {
                    return Err(ModeParseError(s.to_string()));
                }
                mode.cis = cis;
            }
        }
        Ok(mode)
    }
}
