//! String-backed identifier newtypes.

use std::fmt;

use serde::{Deserialize, Serialize};

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn new(value: impl Into<String>) -> Self {
                Self(value.into())
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
            fn from(value: &str) -> Self {
                Self(value.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(value: String) -> Self {
                Self(value)
            }
        }
    };
}

string_id!(CollectionId);
string_id!(ItemId);
string_id!(TemplateId);
string_id!(
    /// Identifier of a task template inside an evaluation template.
    TaskTemplateId
);
string_id!(TeamId);
string_id!(UserId);
string_id!(EvaluationId);
string_id!(
    /// Identifier of a task run, unique within its evaluation.
    TaskRunId
);
string_id!(SubmissionId);
string_id!(RequestId);
