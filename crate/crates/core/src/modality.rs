use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Number of modality classes a probe predicts.
pub const NUM_MODALITIES: usize = 3;

/// One of the three input modalities. The declaration order is the canonical
/// component order for soft labels and probe outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Text,
    Image,
    Audio,
}

impl Modality {
    pub const ALL: [Modality; NUM_MODALITIES] = [Modality::Text, Modality::Image, Modality::Audio];

    /// Component index in soft labels and probe outputs.
    pub fn index(self) -> usize {
        match self {
            Modality::Text => 0,
            Modality::Image => 1,
            Modality::Audio => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Modality> {
        Modality::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Text => "text",
            Modality::Image => "image",
            Modality::Audio => "audio",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "text" | "txt" | "t" => Ok(Modality::Text),
            "image" | "visual" | "vision" | "vis" | "i" => Ok(Modality::Image),
            "audio" | "aud" | "a" => Ok(Modality::Audio),
            other => Err(Error::Validation(format!("unknown modality {other:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn serialization_names_are_stable() {
        let names: Vec<String> = Modality::ALL
            .iter()
            .map(|m| serde_json::to_string(m).unwrap())
            .collect();
        assert_eq!(names, vec!["\"text\"", "\"image\"", "\"audio\""]);
        for m in Modality::ALL {
            assert_eq!(Modality::from_index(m.index()), Some(m));
            assert_eq!(m.as_str().parse::<Modality>().unwrap(), m);
        }
        assert!("smell".parse::<Modality>().is_err());
    }
}
