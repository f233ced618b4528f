//! JSON file holding a constructed residue vector.

use std::fs;
use std::path::Path;

use anyhow::{bail, ensure, Context};
use rpfv_core::num::KorobovSpaceParams;
use rpfv_core::primes::{PrimePool, ResidueVector};
use rpfv_core::rpfv::MemoryMode;
use serde::{Deserialize, Serialize};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub construct_seconds: f64,
    pub mode: MemoryMode,
    pub code_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorFile {
    pub format_version: u32,
    pub n: u64,
    pub d: usize,
    pub alpha: u32,
    pub gamma: Vec<f64>,
    pub tau: f64,
    pub primes: Vec<u64>,
    /// `residues[i][j]` is component `j` modulo `primes[i]`.
    pub residues: Vec<Vec<u64>>,
    pub metadata: Metadata,
}

impl VectorFile {
    pub fn new(v: &ResidueVector, params: &KorobovSpaceParams, tau: f64, metadata: Metadata) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            n: v.pool().budget(),
            d: v.dim(),
            alpha: params.alpha().value(),
            gamma: params.gamma()[..v.dim()].to_vec(),
            tau,
            primes: v.pool().primes().to_vec(),
            residues: v.residues().to_vec(),
            metadata,
        }
    }

    pub fn params(&self) -> anyhow::Result<KorobovSpaceParams> {
        Ok(KorobovSpaceParams::new(self.alpha, self.gamma.clone())?)
    }

    /// Checks every invariant and rebuilds the vector and weights.
    pub fn validate(&self) -> anyhow::Result<(ResidueVector, KorobovSpaceParams)> {
        if self.format_version != FORMAT_VERSION {
            bail!("unsupported format_version {} (expected {FORMAT_VERSION})", self.format_version);
        }
        ensure!(self.gamma.len() == self.d, "gamma has {} entries, d = {}", self.gamma.len(), self.d);
        let params = self.params()?;
        let pool = PrimePool::build(self.n)?;
        ensure!(
            pool.primes() == self.primes.as_slice(),
            "prime list does not match the pool for n = {}",
            self.n
        );
        ensure!(self.residues.len() == self.primes.len(), "one residue row per prime is required");
        for (row, p) in self.residues.iter().zip(&self.primes) {
            ensure!(row.len() == self.d, "residue row for p = {p} has {} entries, d = {}", row.len(), self.d);
        }
        let v = ResidueVector::new(pool, self.residues.clone())?;
        Ok((v, params))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("vector file serialises") + "\n"
    }

    pub fn write(&self, path: &Path) -> anyhow::Result<()> {
        fs::write(path, self.to_json()).with_context(|| format!("writing {}", path.display()))
    }

    pub fn read(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("malformed vector file {}", path.display()))
    }
}

/// Parses `poly:c` (`gamma_j = j^-c`) or a comma-separated list.
pub fn parse_gamma(spec: &str, d: usize) -> anyhow::Result<Vec<f64>> {
    if let Some(c) = spec.strip_prefix("poly:") {
        let c: f64 = c.trim().parse().with_context(|| format!("bad decay in {spec:?}"))?;
        ensure!(c.is_finite(), "decay must be finite");
        return Ok((1..=d).map(|j| (j as f64).powf(-c)).collect());
    }
    let list = spec
        .split(',')
        .map(|x| x.trim().parse::<f64>().with_context(|| format!("bad weight {x:?}")))
        .collect::<anyhow::Result<Vec<_>>>()?;
    ensure!(list.len() == d, "gamma list has {} entries, d = {d}", list.len());
    Ok(list)
}
