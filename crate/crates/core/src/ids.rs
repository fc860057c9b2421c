//! String identifiers for scene objects.

use std::fmt;

use serde::{Deserialize, Serialize};

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident, $prefix:literal) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            /// Prefix used when the scene allocates a fresh id.
            pub const PREFIX: &'static str = $prefix;

            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }

            /// Next free `<prefix><n>` id, one past the largest numbered id in `existing`.
            pub fn next<'a>(existing: impl IntoIterator<Item = &'a Self>) -> Self {
                let next = existing
                    .into_iter()
                    .filter_map(|id| id.0.strip_prefix($prefix)?.parse::<u64>().ok())
                    .max()
                    .map_or(0, |n| n + 1);
                Self(format!("{}{}", $prefix, next))
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
    };
}

string_id!(
    /// Identifies a segment (a sub-mesh that joints and widgets attach to).
    SegmentId,
    "seg"
);
string_id!(JointId, "joint");
string_id!(WidgetId, "widget");
string_id!(ContentId, "content");
