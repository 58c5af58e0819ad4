use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Kinds of user data an app can hand to an ad library.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PrivacyCategory {
    ArbitraryData,
    Keywords,
    Gender,
    Location,
    Age,
    MultipleFactors,
    PostalCode,
    EnableLocation,
    Income,
    Interests,
    AreaCode,
    Country,
    Education,
    Ethnicity,
    Name,
    EMail,
}

impl PrivacyCategory {
    pub const ALL: [PrivacyCategory; 16] = [
        PrivacyCategory::ArbitraryData,
        PrivacyCategory::Keywords,
        PrivacyCategory::Gender,
        PrivacyCategory::Location,
        PrivacyCategory::Age,
        PrivacyCategory::MultipleFactors,
        PrivacyCategory::PostalCode,
        PrivacyCategory::EnableLocation,
        PrivacyCategory::Income,
        PrivacyCategory::Interests,
        PrivacyCategory::AreaCode,
        PrivacyCategory::Country,
        PrivacyCategory::Education,
        PrivacyCategory::Ethnicity,
        PrivacyCategory::Name,
        PrivacyCategory::EMail,
    ];

    /// Stable serialized name.
    pub fn as_str(self) -> &'static str {
        match self {
            PrivacyCategory::ArbitraryData => "ArbitraryData",
            PrivacyCategory::Keywords => "Keywords",
            PrivacyCategory::Gender => "Gender",
            PrivacyCategory::Location => "Location",
            PrivacyCategory::Age => "Age",
            PrivacyCategory::MultipleFactors => "MultipleFactors",
            PrivacyCategory::PostalCode => "PostalCode",
            PrivacyCategory::EnableLocation => "EnableLocation",
            PrivacyCategory::Income => "Income",
            PrivacyCategory::Interests => "Interests",
            PrivacyCategory::AreaCode => "AreaCode",
            PrivacyCategory::Country => "Country",
            PrivacyCategory::Education => "Education",
            PrivacyCategory::Ethnicity => "Ethnicity",
            PrivacyCategory::Name => "Name",
            PrivacyCategory::EMail => "EMail",
        }
    }

    /// Human-readable table label.
    pub fn label(self) -> &'static str {
        match self {
            PrivacyCategory::ArbitraryData => "Arbitrary Data",
            PrivacyCategory::MultipleFactors => "Multiple Factors",
            PrivacyCategory::PostalCode => "Postal Code",
            PrivacyCategory::EnableLocation => "Enable Location",
            PrivacyCategory::AreaCode => "Area Code",
            PrivacyCategory::EMail => "E-Mail",
            other => other.as_str(),
        }
    }

    /// Arbitrary data flows back to the developer; a developer could ship it
    /// anywhere without an ad library, so outputs flag it separately.
    pub fn is_developer_channel(self) -> bool {
        self == PrivacyCategory::ArbitraryData
    }
}

impl fmt::Display for PrivacyCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PrivacyCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PrivacyCategory::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s) || c.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown privacy category {s:?}"))
    }
}
