//! Seeded synthetic corpora: a gold sentence per instance, with hypotheses
//! and pool entries drawn as independently edited copies of it.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Instance;
use crate::error::{MbrError, Result};
use crate::rng::RngStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub seed: u64,
    pub n_instances: usize,
    pub n_hypotheses: usize,
    pub pool_size: usize,
    pub vocab_size: usize,
    pub edit_rate: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            seed: 1,
            n_instances: 50,
            n_hypotheses: 64,
            pool_size: 256,
            vocab_size: 1000,
            edit_rate: 0.15,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_instances == 0 || self.n_hypotheses == 0 || self.pool_size == 0 || self.vocab_size == 0 {
            return Err(MbrError::validation("synthetic corpus counts must be positive"));
        }
        if !(0.0..=1.0).contains(&self.edit_rate) {
            return Err(MbrError::validation(format!(
                "edit rate must be in [0, 1], got {}",
                self.edit_rate
            )));
        }
        Ok(())
    }
}

const MIN_LEN: usize = 8;
const MAX_LEN: usize = 20;

fn make_vocab(n: usize, stream: &RngStream) -> Vec<String> {
    let mut rng = stream.rng();
    let mut seen = std::collections::HashSet::new();
    let mut vocab = Vec::with_capacity(n);
    while vocab.len() < n {
        let len = rng.gen_range(2..=8u32);
        let w: String = (0..len).map(|_| (b'a' + rng.gen_range(0..26u8)) as char).collect();
        if seen.insert(w.clone()) {
            vocab.push(w);
        }
    }
    vocab
}

/// Each token is edited with probability `rate`; an edit is a substitution,
/// a deletion or an insertion after the token, chosen uniformly.
fn edit<R: Rng>(gold: &[usize], rate: f64, vocab_len: usize, rng: &mut R) -> Vec<usize> {
    let mut out = Vec::with_capacity(gold.len() + 4);
    for &tok in gold {
        if rng.gen::<f64>() < rate {
            match rng.gen_range(0..3u32) {
                0 => out.push(rng.gen_range(0..vocab_len as u32) as usize),
                1 => {}
                _ => {
                    out.push(tok);
                    out.push(rng.gen_range(0..vocab_len as u32) as usize);
                }
            }
        } else {
            out.push(tok);
        }
    }
    out
}

fn render(tokens: &[usize], vocab: &[String]) -> String {
    tokens.iter().map(|&t| vocab[t].as_str()).collect::<Vec<_>>().join(" ")
}

pub fn generate_synthetic(params: &SynthParams) -> Result<Vec<Instance>> {
    params.validate()?;
    let root = RngStream::new(params.seed).derive("synth");
    let vocab = make_vocab(params.vocab_size, &root.derive("vocab"));
    let v = vocab.len();
    Ok((0..params.n_instances)
        .map(|i| {
            let mut rng = root.derive(i).rng();
            let len = rng.gen_range(MIN_LEN as u32..=MAX_LEN as u32) as usize;
            let gold: Vec<usize> = (0..len).map(|_| rng.gen_range(0..v as u32) as usize).collect();
            let hypotheses = (0..params.n_hypotheses)
                .map(|_| render(&edit(&gold, params.edit_rate, v, &mut rng), &vocab))
                .collect();
            let pool = (0..params.pool_size)
                .map(|_| render(&edit(&gold, params.edit_rate, v, &mut rng), &vocab))
                .collect();
            Instance {
                id: format!("synth-{i:04}"),
                source: None,
                reference: Some(render(&gold, &vocab)),
                hypotheses,
                pool,
            }
        })
        .collect())
}
