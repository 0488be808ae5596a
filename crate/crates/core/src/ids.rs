//! String-backed identifier newtypes.

use std::fmt;

use serde::{Deserialize, Serialize};

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn new(s: impl Into<String>) -> Self {
                Self(s.into())
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
                Self(s.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }
    };
}

id_type!(
    /// Logistics node (hub, depot, site, disposal).
    NodeId
);
id_type!(ContainerId);
id_type!(MeanId);
id_type!(ContractId);
id_type!(
    /// Company operating a mean; custody passes between carriers.
    CarrierId
);
id_type!(DemandId);
id_type!(SetId);
id_type!(OrderId);
id_type!(NoteId);
id_type!(LoadId);
id_type!(BlockId);
id_type!(ShipmentId);

/// Simulation time in integer minutes from 0.
pub type Minutes = u64;

/// Abstract currency units.
pub type Money = f64;

/// Deterministic sequential id source, one counter per prefix.
#[derive(Debug, Clone, Default)]
pub struct IdGen {
    counters: std::collections::BTreeMap<&'static str, u64>,
}

impl IdGen {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn next(&mut self, prefix: &'static str) -> String {
        let n = self.counters.entry(prefix).or_insert(0);
        *n += 1;
        format!("{prefix}{n:04}")
    }
}
