//! Opaque identifiers.

use std::borrow::Borrow;
use std::fmt;

use serde::{Deserialize, Serialize};

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub fn new(s: impl Into<String>) -> Self {
                $name(s.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                $name(s.to_string())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                $name(s)
            }
        }

        impl Borrow<str> for $name {
            fn borrow(&self) -> &str {
                &self.0
            }
        }
    };
}

string_id!(
    /// Account identifier. Accounts are asserted, not authenticated.
    /// Identifiers starting with `@` are reserved for system accounts.
    AccountId
);
string_id!(TokenId);
string_id!(OrderId);

impl AccountId {
    /// The account holding a sponsored token's collateral.
    pub fn reserve(token: &TokenId) -> AccountId {
        AccountId(format!("@reserve:{}", token.as_str()))
    }

    pub fn is_system(&self) -> bool {
        self.0.starts_with('@')
    }
}
