use std::collections::HashMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::bm25::Bm25Index;
use crate::boolexpr::{expr_length, parse, BoolExpr};
use crate::error::StoreError;

/// A verified instruction/expression pair shown to the model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InContextExample {
    pub instruction: String,
    /// Canonical rendering of the expression.
    pub expression: String,
    pub token_length: usize,
}

impl InContextExample {
    pub fn new(instruction: &str, expr: &BoolExpr) -> Self {
        Self {
            instruction: instruction.to_string(),
            expression: expr.to_string(),
            token_length: expr_length(expr),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Retention {
    Added,
    /// A strictly shorter expression replaced the incumbent.
    Replaced { old_length: usize },
    /// The incumbent was at most as long and stays.
    KeptIncumbent,
}

impl Retention {
    pub fn changed(self) -> bool {
        self != Retention::KeptIncumbent
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StoreLine {
    instruction: String,
    expression: String,
}

/// At most one example per instruction, indexed by BM25 over instructions.
#[derive(Debug, Clone, Default)]
pub struct ExampleStore {
    examples: Vec<InContextExample>,
    by_instruction: HashMap<String, usize>,
    index: Bm25Index,
}

impl ExampleStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn get(&self, instruction: &str) -> Option<&InContextExample> {
        self.by_instruction.get(instruction).map(|&i| &self.examples[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = &InContextExample> {
        self.examples.iter()
    }

    /// Offer a verified expression. The shorter expression is kept; on equal
    /// length the incumbent wins.
    pub fn offer(&mut self, instruction: &str, expr: &BoolExpr) -> Retention {
        let candidate = InContextExample::new(instruction, expr);
        match self.by_instruction.get(instruction) {
            Some(&i) => {
                let old = self.examples[i].token_length;
                if candidate.token_length < old {
                    self.examples[i] = candidate;
                    Retention::Replaced { old_length: old }
                } else {
                    Retention::KeptIncumbent
                }
            }
            None => {
                let i = self.index.add(instruction);
                debug_assert_eq!(i, self.examples.len());
                self.by_instruction.insert(instruction.to_string(), i);
                self.examples.push(candidate);
                Retention::Added
            }
        }
    }

    /// The `k` examples whose instructions best match `query`.
    pub fn retrieve(&self, query: &str, k: usize) -> Vec<&InContextExample> {
        self.index
            .top_k(query, k)
            .into_iter()
            .map(|i| &self.examples[i])
            .collect()
    }

    /// One `{instruction, expression}` JSON object per line.
    pub fn save_jsonl<W: Write>(&self, mut w: W) -> Result<(), StoreError> {
        for e in &self.examples {
            let line = StoreLine {
                instruction: e.instruction.clone(),
                expression: e.expression.clone(),
            };
            serde_json::to_writer(&mut w, &line).map_err(std::io::Error::from)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Rebuild a store by offering each line in order.
    pub fn load_jsonl<R: BufRead>(r: R) -> Result<Self, StoreError> {
        let mut store = Self::new();
        for (n, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: StoreLine = serde_json::from_str(&line).map_err(|e| StoreError::Format {
                line: n + 1,
                msg: e.to_string(),
            })?;
            let expr = parse(&rec.expression).map_err(|e| StoreError::Format {
                line: n + 1,
                msg: e.to_string(),
            })?;
            store.offer(&rec.instruction, &expr);
        }
        Ok(store)
    }
}
