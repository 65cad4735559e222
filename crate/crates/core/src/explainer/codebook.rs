//! The closed vocabulary of warning feature names.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureTerm {
    pub term: String,
    pub definition: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Codebook {
    pub terms: Vec<FeatureTerm>,
}

pub const CREDENTIAL_SOLICITATION: &str = "Credential solicitation";
pub const URGENCY_LANGUAGE: &str = "Urgency language";
pub const NON_FUNCTIONAL_LINKS: &str = "Non-functional links";
pub const BRAND_IMITATION: &str = "Brand imitation text";
pub const DECEPTIVE_REDIRECT: &str = "Deceptive redirect";
pub const HIDDEN_INTERACTIVE: &str = "Hidden interactive element";
pub const GRAMMATICAL_ERRORS: &str = "Grammatical errors";
pub const POOR_SECURITY: &str = "Poor security indicators";
pub const MISMATCHED_URLS: &str = "Mismatched URLs";
pub const DECEPTIVE_CONTENT: &str = "Deceptive content";

impl Default for Codebook {
    fn default() -> Self {
        let t = |term: &str, definition: &str| FeatureTerm { term: term.into(), definition: definition.into() };
        Codebook {
            terms: vec![
                t(CREDENTIAL_SOLICITATION, "Fields or forms asking for passwords, card numbers or other secrets."),
                t(URGENCY_LANGUAGE, "Text pressuring the visitor to act immediately or face a penalty."),
                t(NON_FUNCTIONAL_LINKS, "Links that lead nowhere, added to make the page look complete."),
                t(BRAND_IMITATION, "Text or names copied from a well-known organization."),
                t(DECEPTIVE_REDIRECT, "Navigation that sends the visitor somewhere other than it claims."),
                t(HIDDEN_INTERACTIVE, "Controls revealed or enabled only after the page loads."),
                t(GRAMMATICAL_ERRORS, "Mistakes in spelling, grammar and punctuation."),
                t(POOR_SECURITY, "Weak security signals such as plain HTTP."),
                t(MISMATCHED_URLS, "URLs that do not match the official address of the imitated organization."),
                t(DECEPTIVE_CONTENT, "Content that contributed to the detection without fitting a more specific term."),
            ],
        }
    }
}

impl Codebook {
    /// The codebook spelling of `name`, matched case-insensitively.
    pub fn canonical(&self, name: &str) -> Option<&str> {
        let name = name.trim();
        self.terms.iter().find(|t| t.term.eq_ignore_ascii_case(name)).map(|t| t.term.as_str())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.canonical(name).is_some()
    }

    pub fn definition(&self, name: &str) -> Option<&str> {
        let c = self.canonical(name)?;
        self.terms.iter().find(|t| t.term == c).map(|t| t.definition.as_str())
    }
}
