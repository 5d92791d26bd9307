//! Source preparation ahead of relational loading.
//!
//! A [`Workspace`] carries the sources, mapping and constraints through
//! normalization and preparation; each step rewrites all three together.

pub mod normalize;
pub mod prepare;
pub mod selection;

use std::collections::BTreeMap;

use serde::Serialize;

use crate::constraints::{ConstraintKind, ConstraintSet};
use crate::error::Result;
use crate::model::{MappingDocument, TabularSource};

pub use normalize::{cut, split, SURROGATE};
pub use prepare::{create, duplicates, sub};
pub use selection::{filter_metadata, project, select_annotations, select_sources, SelectionPlan};

/// What to do with values that violate a declared constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    #[default]
    Error,
    Warn,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Lineage {
    pub origins: Vec<String>,
    pub applied: Vec<String>,
}

#[derive(Debug, Clone, Default)]
pub struct Workspace {
    pub sources: Vec<TabularSource>,
    pub mapping: MappingDocument,
    pub constraints: ConstraintSet,
    pub lineage: BTreeMap<String, Lineage>,
}

impl Workspace {
    pub fn new(sources: Vec<TabularSource>, mapping: MappingDocument, constraints: ConstraintSet) -> Self {
        let lineage = sources
            .iter()
            .map(|s| {
                (
                    s.path.clone(),
                    Lineage {
                        origins: vec![s.path.clone()],
                        applied: Vec::new(),
                    },
                )
            })
            .collect();
        Workspace {
            sources,
            mapping,
            constraints,
            lineage,
        }
    }

    pub(crate) fn record(&mut self, path: &str, from: &[&str], note: String) {
        let mut origins = Vec::new();
        for f in from {
            if let Some(l) = self.lineage.get(*f) {
                origins.extend(l.origins.iter().cloned());
            }
        }
        let entry = self.lineage.entry(path.to_string()).or_default();
        for o in origins {
            if !entry.origins.contains(&o) {
                entry.origins.push(o);
            }
        }
        entry.applied.push(note);
    }

    /// Applies every split, then every cut, in constraint order.
    pub fn normalize(&mut self) -> Result<()> {
        for phase in [0u8, 1] {
            let todo: Vec<_> = self
                .constraints
                .iter()
                .filter(|c| c.kind.phase() == phase)
                .cloned()
                .collect();
            for c in &todo {
                match c.kind {
                    ConstraintKind::Separator2NF { .. } => self.apply_split(c)?,
                    ConstraintKind::MultiEntity3NF { .. } => self.apply_cut(c)?,
                    _ => {}
                }
            }
            self.constraints.constraints.retain(|c| c.kind.phase() != phase);
        }
        Ok(())
    }

    pub fn source(&self, path: &str) -> Option<&TabularSource> {
        self.sources.iter().find(|s| s.path == path)
    }
}
