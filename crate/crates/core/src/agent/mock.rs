//! Offline chat models.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;

use super::chat::ChatModel;
use super::prompt::ChatPrompt;
use crate::boolexpr::{parse, BoolExpr, SYMBOL_COUNT};
use crate::error::ChatError;
use crate::gridworld::{Attribute, Color, Shape};
use crate::rng::SimRng;
use crate::tasksuite::TaskSpec;

/// If the command itself is among the demonstrations, its expression.
fn exact_copy(prompt: &ChatPrompt) -> Option<String> {
    prompt
        .examples
        .iter()
        .find(|(i, _)| *i == prompt.command)
        .map(|(_, e)| e.clone())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Corruption {
    OperatorFlip,
    SymbolSwap,
    ExtraConjunct,
}

fn count_binary(e: &BoolExpr) -> usize {
    match e {
        BoolExpr::Var(_) => 0,
        BoolExpr::Not(x) => count_binary(x),
        BoolExpr::And(l, r) | BoolExpr::Or(l, r) => 1 + count_binary(l) + count_binary(r),
    }
}

fn count_vars(e: &BoolExpr) -> usize {
    match e {
        BoolExpr::Var(_) => 1,
        BoolExpr::Not(x) => count_vars(x),
        BoolExpr::And(l, r) | BoolExpr::Or(l, r) => count_vars(l) + count_vars(r),
    }
}

/// Rebuild `e`, flipping the `*k`-th binary operator in pre-order.
fn flip_nth(e: &BoolExpr, k: &mut usize) -> BoolExpr {
    match e {
        BoolExpr::Var(_) => e.clone(),
        BoolExpr::Not(x) => BoolExpr::not(flip_nth(x, k)),
        BoolExpr::And(l, r) | BoolExpr::Or(l, r) => {
            let hit = *k == 0;
            *k = k.wrapping_sub(1);
            let (l, r) = (flip_nth(l, k), flip_nth(r, k));
            match (e, hit) {
                (BoolExpr::And(..), false) | (BoolExpr::Or(..), true) => BoolExpr::and(l, r),
                _ => BoolExpr::or(l, r),
            }
        }
    }
}

/// Rebuild `e`, renaming the `*k`-th variable in pre-order to `to`.
fn swap_nth(e: &BoolExpr, k: &mut usize, to: u8) -> BoolExpr {
    match e {
        BoolExpr::Var(i) => {
            let hit = *k == 0;
            *k = k.wrapping_sub(1);
            BoolExpr::var(if hit { to } else { *i })
        }
        BoolExpr::Not(x) => BoolExpr::not(swap_nth(x, k, to)),
        BoolExpr::And(l, r) => {
            let l = swap_nth(l, k, to);
            BoolExpr::and(l, swap_nth(r, k, to))
        }
        BoolExpr::Or(l, r) => {
            let l = swap_nth(l, k, to);
            BoolExpr::or(l, swap_nth(r, k, to))
        }
    }
}

fn nth_var(e: &BoolExpr, k: usize) -> u8 {
    let mut syms = Vec::new();
    fn walk(e: &BoolExpr, out: &mut Vec<u8>) {
        match e {
            BoolExpr::Var(i) => out.push(*i),
            BoolExpr::Not(x) => walk(x, out),
            BoolExpr::And(l, r) | BoolExpr::Or(l, r) => {
                walk(l, out);
                walk(r, out);
            }
        }
    }
    walk(e, &mut syms);
    syms[k]
}

/// Apply one random corruption. Operator flips fall back to a symbol swap
/// on expressions without binary operators.
pub fn corrupt<R: Rng + ?Sized>(e: &BoolExpr, rng: &mut R) -> (BoolExpr, Corruption) {
    let mut kind = match rng.gen_range(0..3) {
        0 => Corruption::OperatorFlip,
        1 => Corruption::SymbolSwap,
        _ => Corruption::ExtraConjunct,
    };
    if kind == Corruption::OperatorFlip && count_binary(e) == 0 {
        kind = Corruption::SymbolSwap;
    }
    let out = match kind {
        Corruption::OperatorFlip => {
            let mut k = rng.gen_range(0..count_binary(e));
            flip_nth(e, &mut k)
        }
        Corruption::SymbolSwap => {
            let k = rng.gen_range(0..count_vars(e));
            let old = nth_var(e, k);
            let to = (old + rng.gen_range(1..SYMBOL_COUNT)) % SYMBOL_COUNT;
            swap_nth(e, &mut { k }, to)
        }
        Corruption::ExtraConjunct => {
            let v = BoolExpr::var(rng.gen_range(0..SYMBOL_COUNT));
            let lit = if rng.gen_bool(0.5) { BoolExpr::not(v) } else { v };
            BoolExpr::and(e.clone(), lit)
        }
    };
    (out, kind)
}

/// Knows the ground truth for every task and corrupts each candidate
/// independently with probability `noise_rate`.
#[derive(Debug, Clone)]
pub struct OracleMock {
    truth: HashMap<String, BoolExpr>,
    noise_rate: f64,
}

impl OracleMock {
    pub fn new(tasks: &[TaskSpec], noise_rate: f64) -> Self {
        assert!((0.0..=1.0).contains(&noise_rate), "noise rate outside [0, 1]");
        Self {
            truth: tasks
                .iter()
                .map(|t| (t.instruction.clone(), t.truth_expr.clone()))
                .collect(),
            noise_rate,
        }
    }

    /// One candidate for `truth` and whether it was corrupted.
    pub fn draw(&self, truth: &BoolExpr, rng: &mut SimRng) -> (BoolExpr, bool) {
        if rng.gen_bool(self.noise_rate) {
            (corrupt(truth, rng).0, true)
        } else {
            (truth.clone(), false)
        }
    }
}

impl ChatModel for OracleMock {
    fn complete(
        &self,
        prompt: &ChatPrompt,
        n: usize,
        _temperature: f64,
        rng: &mut SimRng,
    ) -> Result<Vec<String>, ChatError> {
        let copy = exact_copy(prompt);
        let truth = self.truth.get(&prompt.command);
        Ok((0..n)
            .map(|i| match (&copy, truth) {
                (Some(c), _) if i == 0 => c.clone(),
                (_, Some(t)) => self.draw(t, rng).0.to_string(),
                _ => String::new(),
            })
            .collect())
    }
}

const ATTRIBUTE_WORDS: usize = 9;

fn attribute_word(token: &str) -> Option<usize> {
    Color::ALL
        .iter()
        .map(|c| Attribute::Color(*c))
        .chain(Shape::ALL.iter().map(|s| Attribute::Shape(*s)))
        .find(|a| a.name() == token)
        .map(Attribute::index)
}

/// Literals in order of appearance, each possibly negated by a preceding
/// "not", and whether they are joined by "or".
pub fn instruction_literals(text: &str) -> (Vec<(usize, bool)>, bool) {
    let mut lits = Vec::new();
    let mut negate = false;
    let mut is_or = false;
    for tok in text.split_whitespace().map(str::to_lowercase) {
        match tok.as_str() {
            "not" => negate = true,
            "or" => is_or = true,
            t => {
                if let Some(w) = attribute_word(t) {
                    lits.push((w, negate));
                    negate = false;
                }
            }
        }
    }
    (lits, is_or)
}

/// Rule-based parser that knows the grammar of instructions but must infer
/// which symbol stands for which word from the demonstrations it is shown.
///
/// Word/symbol affinity is `#(both present) - #(exactly one present)` over
/// the demonstrations. Candidates are literal-to-symbol assignments ranked
/// by total affinity; at positive temperature equally scored symbols are
/// ordered randomly, at zero temperature by index.
#[derive(Debug, Clone, Default)]
pub struct HeuristicMock;

impl HeuristicMock {
    pub fn affinity(prompt: &ChatPrompt) -> [[i32; SYMBOL_COUNT as usize]; ATTRIBUTE_WORDS] {
        let mut score = [[0i32; SYMBOL_COUNT as usize]; ATTRIBUTE_WORDS];
        for (instr, expr) in &prompt.examples {
            let Ok(e) = parse(expr) else { continue };
            let syms = e.symbols();
            let (lits, _) = instruction_literals(instr);
            for (w, row) in score.iter_mut().enumerate() {
                let has_w = lits.iter().any(|(x, _)| *x == w);
                for (s, cell) in row.iter_mut().enumerate() {
                    let has_s = syms.contains(&(s as u8));
                    match (has_w, has_s) {
                        (true, true) => *cell += 1,
                        (false, false) => {}
                        _ => *cell -= 1,
                    }
                }
            }
        }
        score
    }
}

impl ChatModel for HeuristicMock {
    fn complete(
        &self,
        prompt: &ChatPrompt,
        n: usize,
        temperature: f64,
        rng: &mut SimRng,
    ) -> Result<Vec<String>, ChatError> {
        let mut out = Vec::with_capacity(n);
        if let Some(c) = exact_copy(prompt) {
            out.push(c);
        }
        let (lits, is_or) = instruction_literals(&prompt.command);
        if !lits.is_empty() {
            let score = Self::affinity(prompt);
            let width = if lits.len() == 1 { 9 } else { 4 };
            let ranked: Vec<Vec<u8>> = lits
                .iter()
                .map(|(w, _)| {
                    let mut syms: Vec<u8> = (0..SYMBOL_COUNT).collect();
                    if temperature > 0.0 {
                        syms.shuffle(rng);
                    }
                    syms.sort_by_key(|s| -score[*w][*s as usize]);
                    syms.truncate(width);
                    syms
                })
                .collect();
            let mut combos: Vec<(i32, Vec<u8>)> = vec![(0, Vec::new())];
            for (li, syms) in ranked.iter().enumerate() {
                let w = lits[li].0;
                let mut next = Vec::new();
                for (total, prefix) in &combos {
                    for &s in syms.iter().filter(|s| !prefix.contains(s)) {
                        let mut p = prefix.clone();
                        p.push(s);
                        next.push((total + score[w][s as usize], p));
                    }
                }
                combos = next;
            }
            combos.sort_by_key(|(total, _)| -total);
            for (_, syms) in combos {
                if out.len() >= n {
                    break;
                }
                let mut parts = lits.iter().zip(&syms).map(|((_, neg), s)| {
                    let v = BoolExpr::var(*s);
                    if *neg {
                        BoolExpr::not(v)
                    } else {
                        v
                    }
                });
                let first = parts.next().expect("at least one literal");
                let e = parts.fold(first, |acc, p| {
                    if is_or {
                        BoolExpr::or(acc, p)
                    } else {
                        BoolExpr::and(acc, p)
                    }
                });
                let s = e.to_string();
                if !out.contains(&s) {
                    out.push(s);
                }
            }
        }
        out.resize(n, String::new());
        Ok(out)
    }
}

/// Replies with a fixed list, padded with empty strings.
#[derive(Debug, Clone)]
pub struct FixedMock {
    pub replies: Vec<String>,
}

impl FixedMock {
    pub fn new<S: Into<String>>(replies: impl IntoIterator<Item = S>) -> Self {
        Self {
            replies: replies.into_iter().map(Into::into).collect(),
        }
    }
}

impl ChatModel for FixedMock {
    fn complete(
        &self,
        _prompt: &ChatPrompt,
        n: usize,
        _temperature: f64,
        _rng: &mut SimRng,
    ) -> Result<Vec<String>, ChatError> {
        let mut out: Vec<String> = self.replies.iter().take(n).cloned().collect();
        out.resize(n, String::new());
        Ok(out)
    }
}
