//! Named scalar and curve results with provenance.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub name: String,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub passed: Option<bool>,
    #[serde(skip_serializing_if = "String::is_empty", default)]
    pub note: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub name: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub name: String,
    /// The statement being measured.
    pub provenance: String,
    pub entries: Vec<Entry>,
    pub curves: Vec<Curve>,
    pub flags: Vec<String>,
}

impl DiagnosticsReport {
    pub fn new(name: impl Into<String>, provenance: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            provenance: provenance.into(),
            ..Default::default()
        }
    }

    pub fn value(&mut self, name: impl Into<String>, value: f64) -> &mut Self {
        self.entries.push(Entry {
            name: name.into(),
            value,
            ..Default::default()
        });
        self
    }

    /// Records a value together with the tolerance it was judged against.
    pub fn check(
        &mut self,
        name: impl Into<String>,
        value: f64,
        tolerance: f64,
        passed: bool,
    ) -> &mut Self {
        self.entries.push(Entry {
            name: name.into(),
            value,
            tolerance: Some(tolerance),
            passed: Some(passed),
            note: String::new(),
        });
        self
    }

    pub fn curve(&mut self, name: impl Into<String>, x: Vec<f64>, y: Vec<f64>) -> &mut Self {
        self.curves.push(Curve {
            name: name.into(),
            x,
            y,
        });
        self
    }

    pub fn flag(&mut self, text: impl Into<String>) -> &mut Self {
        self.flags.push(text.into());
        self
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.entries.iter().find(|e| e.name == name).map(|e| e.value)
    }

    /// False if any judged entry failed.
    pub fn all_passed(&self) -> bool {
        self.entries.iter().all(|e| e.passed != Some(false))
    }
}
