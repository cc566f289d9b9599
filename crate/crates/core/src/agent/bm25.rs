use std::collections::HashMap;

/// Okapi BM25 over lowercase whitespace tokens. Documents are append-only.
#[derive(Debug, Clone)]
pub struct Bm25Index {
    k1: f64,
    b: f64,
    docs: Vec<HashMap<String, u32>>,
    lengths: Vec<usize>,
    df: HashMap<String, usize>,
    total_len: usize,
}

impl Default for Bm25Index {
    fn default() -> Self {
        Self::new(1.5, 0.75)
    }
}

pub fn bm25_tokens(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_lowercase).collect()
}

impl Bm25Index {
    pub fn new(k1: f64, b: f64) -> Self {
        Self {
            k1,
            b,
            docs: Vec::new(),
            lengths: Vec::new(),
            df: HashMap::new(),
            total_len: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn add(&mut self, text: &str) -> usize {
        let tokens = bm25_tokens(text);
        let mut tf: HashMap<String, u32> = HashMap::new();
        for t in &tokens {
            *tf.entry(t.clone()).or_default() += 1;
        }
        for t in tf.keys() {
            *self.df.entry(t.clone()).or_default() += 1;
        }
        self.total_len += tokens.len();
        self.lengths.push(tokens.len());
        self.docs.push(tf);
        self.docs.len() - 1
    }

    fn idf(&self, term: &str) -> f64 {
        let n = self.docs.len() as f64;
        let df = self.df.get(term).copied().unwrap_or(0) as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    /// Score of every document against `query`, in insertion order.
    pub fn scores(&self, query: &str) -> Vec<f64> {
        if self.docs.is_empty() {
            return Vec::new();
        }
        let avg = self.total_len as f64 / self.docs.len() as f64;
        let terms = bm25_tokens(query);
        let idfs: Vec<f64> = terms.iter().map(|t| self.idf(t)).collect();
        self.docs
            .iter()
            .zip(&self.lengths)
            .map(|(tf, &len)| {
                let norm = self.k1 * (1.0 - self.b + self.b * len as f64 / avg.max(1e-12));
                terms
                    .iter()
                    .zip(&idfs)
                    .map(|(t, idf)| {
                        let f = tf.get(t).copied().unwrap_or(0) as f64;
                        idf * f * (self.k1 + 1.0) / (f + norm)
                    })
                    .sum()
            })
            .collect()
    }

    /// Indices of the `k` best documents, ties kept in insertion order.
    pub fn top_k(&self, query: &str, k: usize) -> Vec<usize> {
        let scores = self.scores(query);
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        order.truncate(k);
        order
    }
}
