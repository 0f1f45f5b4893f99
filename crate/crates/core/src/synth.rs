//! Seeded synthetic corpora with Zipfian unigram statistics.
//!
//! Tokens are `w0`, `w1`, ... by frequency rank. Each type owns a small set of
//! preferred successors; with probability `stickiness` the next token comes
//! from that set, otherwise from the Zipf marginal. This gives a mix of sticky
//! pairs and types with diverse continuations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Zipf};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZipfCorpus {
    pub vocab_size: usize,
    pub exponent: f64,
    pub stickiness: f64,
    pub max_successors: usize,
}

impl Default for ZipfCorpus {
    fn default() -> Self {
        ZipfCorpus { vocab_size: 1000, exponent: 1.0, stickiness: 0.5, max_successors: 8 }
    }
}

impl ZipfCorpus {
    pub fn new(vocab_size: usize) -> Self {
        ZipfCorpus { vocab_size, ..Default::default() }
    }

    fn zipf(&self) -> Result<Zipf<f64>> {
        if self.vocab_size == 0 || !(0.0..=1.0).contains(&self.stickiness) || self.max_successors == 0 {
            return Err(Error::InvalidParameter(format!("invalid synthetic corpus parameters {self:?}")));
        }
        Zipf::new(self.vocab_size as u64, self.exponent).map_err(|e| Error::InvalidParameter(e.to_string()))
    }

    /// Token ranks of a corpus of `n_tokens` tokens.
    pub fn ranks(&self, n_tokens: usize, seed: u64) -> Result<Vec<usize>> {
        let zipf = self.zipf()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draw = |rng: &mut ChaCha8Rng| zipf.sample(rng) as usize - 1;
        let successors: Vec<Vec<usize>> = (0..self.vocab_size)
            .map(|_| {
                let k = rng.gen_range(1..=self.max_successors);
                (0..k).map(|_| draw(&mut rng)).collect()
            })
            .collect();
        let mut out = Vec::with_capacity(n_tokens);
        let mut prev: Option<usize> = None;
        for _ in 0..n_tokens {
            let next = match prev {
                Some(p) if rng.gen_bool(self.stickiness) => {
                    let set = &successors[p];
                    set[rng.gen_range(0..set.len())]
                }
                _ => draw(&mut rng),
            };
            out.push(next);
            prev = Some(next);
        }
        Ok(out)
    }

    /// Surface tokens of a corpus of `n_tokens` tokens.
    pub fn tokens(&self, n_tokens: usize, seed: u64) -> Result<Vec<String>> {
        Ok(self.ranks(n_tokens, seed)?.into_iter().map(|r| format!("w{r}")).collect())
    }

    /// The same stream broken into lines of `line_len` tokens.
    pub fn lines(&self, n_tokens: usize, line_len: usize, seed: u64) -> Result<Vec<Vec<String>>> {
        let line_len = line_len.max(1);
        Ok(self.tokens(n_tokens, seed)?.chunks(line_len).map(<[String]>::to_vec).collect())
    }
}
