//! Synthetic Gaussian-mixture data, Dirichlet non-IID partitioning and
//! per-client minibatch streams.
//!
//! # Dataset file format
//!
//! All integers little-endian.
//!
//! | offset | size      | field                                  |
//! |--------|-----------|----------------------------------------|
//! | 0      | 4         | magic `b"EHFD"`                        |
//! | 4      | 4 (u32)   | format version, currently `1`          |
//! | 8      | 4 (u32)   | `n`, number of samples                 |
//! | 12     | 4 (u32)   | `d_in`, input width                    |
//! | 16     | 4 (u32)   | `C`, number of classes                 |
//! | 20     | 4·n·d_in  | inputs as `f32`, row-major             |
//! | ...    | 4·n       | labels as `i32`, each in `[0, C)`      |

use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{EhflError, Result};
use crate::learner::Minibatch;

pub const DATASET_MAGIC: [u8; 4] = *b"EHFD";
pub const DATASET_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    inputs: Vec<f64>,
    dim: usize,
    labels: Vec<usize>,
    classes: usize,
}

impl Dataset {
    pub fn new(inputs: Vec<f64>, dim: usize, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if labels.is_empty() || dim == 0 || inputs.len() != dim * labels.len() {
            return Err(EhflError::Shape(format!(
                "dataset with {} values, {} labels, width {dim}",
                inputs.len(),
                labels.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&y| y >= classes) {
            return Err(EhflError::Shape(format!(
                "label {bad} >= {classes} classes"
            )));
        }
        Ok(Dataset {
            inputs,
            dim,
            labels,
            classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.dim..(i + 1) * self.dim]
    }

    /// Per-class sample counts.
    pub fn histogram(&self) -> Vec<usize> {
        let mut h = vec![0; self.classes];
        for &y in &self.labels {
            h[y] += 1;
        }
        h
    }

    /// Gathers the given rows into a minibatch.
    pub fn select(&self, indices: &[usize]) -> Minibatch {
        let mut inputs = Vec::with_capacity(indices.len() * self.dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            inputs.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Minibatch::new(inputs, self.dim, labels).expect("rows of a valid dataset")
    }

    /// The whole dataset as one batch.
    pub fn as_batch(&self) -> Minibatch {
        Minibatch::new(self.inputs.clone(), self.dim, self.labels.clone()).expect("valid dataset")
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let b = self.select(indices);
        Dataset {
            inputs: b.inputs().to_vec(),
            dim: self.dim,
            labels: b.labels().to_vec(),
            classes: self.classes,
        }
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&DATASET_MAGIC)?;
        for v in [
            DATASET_VERSION,
            self.len() as u32,
            self.dim as u32,
            self.classes as u32,
        ] {
            w.write_all(&v.to_le_bytes())?;
        }
        for &x in &self.inputs {
            w.write_all(&(x as f32).to_le_bytes())?;
        }
        for &y in &self.labels {
            w.write_all(&(y as i32).to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Dataset> {
        let mut word = [0u8; 4];
        r.read_exact(&mut word)?;
        if word != DATASET_MAGIC {
            return Err(EhflError::DatasetFormat(format!("bad magic {word:?}")));
        }
        let read_u32 = |r: &mut R| -> Result<u32> {
            let mut b = [0u8; 4];
            r.read_exact(&mut b)?;
            Ok(u32::from_le_bytes(b))
        };
        let version = read_u32(&mut r)?;
        if version != DATASET_VERSION {
            return Err(EhflError::DatasetFormat(format!(
                "unsupported version {version}"
            )));
        }
        let n = read_u32(&mut r)? as usize;
        let dim = read_u32(&mut r)? as usize;
        let classes = read_u32(&mut r)? as usize;
        let mut buf = vec![0u8; 4 * n * dim];
        r.read_exact(&mut buf)?;
        let inputs = buf
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        let mut buf = vec![0u8; 4 * n];
        r.read_exact(&mut buf)?;
        let mut labels = Vec::with_capacity(n);
        for c in buf.chunks_exact(4) {
            let y = i32::from_le_bytes([c[0], c[1], c[2], c[3]]);
            if y < 0 || y as usize >= classes {
                return Err(EhflError::DatasetFormat(format!(
                    "label {y} outside [0, {classes})"
                )));
            }
            labels.push(y as usize);
        }
        Dataset::new(inputs, dim, labels, classes)
            .map_err(|e| EhflError::DatasetFormat(e.to_string()))
    }
}

/// Gaussian mixture with one unit-covariance component per class. Class
/// means are drawn once from `N(0, spread^2)` per coordinate.
#[derive(Debug, Clone)]
pub struct GaussianMixture {
    means: Vec<Vec<f64>>,
}

impl GaussianMixture {
    pub fn new(classes: usize, dim: usize, spread: f64, rng: &mut ChaCha8Rng) -> Self {
        assert!(classes >= 2, "need at least two classes");
        let means = (0..classes)
            .map(|_| {
                (0..dim)
                    .map(|_| {
                        let e: f64 = StandardNormal.sample(rng);
                        spread * e
                    })
                    .collect::<Vec<f64>>()
            })
            .collect();
        GaussianMixture { means }
    }

    pub fn classes(&self) -> usize {
        self.means.len()
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    /// `per_class` samples of every class, class-major order.
    pub fn sample(&self, per_class: usize, rng: &mut ChaCha8Rng) -> Dataset {
        let dim = self.dim();
        let mut inputs = Vec::with_capacity(self.classes() * per_class * dim);
        let mut labels = Vec::with_capacity(self.classes() * per_class);
        for (c, mean) in self.means.iter().enumerate() {
            for _ in 0..per_class {
                for &mu in mean {
                    let e: f64 = StandardNormal.sample(rng);
                    inputs.push(mu + e);
                }
                labels.push(c);
            }
        }
        Dataset::new(inputs, dim, labels, self.classes()).expect("well-formed mixture sample")
    }
}

/// Draws a pool of `per_class` samples per class from a fresh mixture.
pub fn generate_pool(
    classes: usize,
    dim: usize,
    per_class: usize,
    spread: f64,
    rng: &mut ChaCha8Rng,
) -> Dataset {
    GaussianMixture::new(classes, dim, spread, rng).sample(per_class, rng)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionSpec {
    pub alpha: f64,
    pub clients: usize,
    pub samples_per_client: usize,
}

/// Symmetric Dirichlet(alpha) draw via normalized Gamma variates. If every
/// Gamma variate underflows to zero, a single uniformly chosen class gets all
/// the mass (the limit of vanishing alpha).
pub fn dirichlet_proportions(alpha: f64, classes: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let gamma = Gamma::new(alpha, 1.0).expect("alpha > 0");
    let draws: Vec<f64> = (0..classes).map(|_| gamma.sample(rng)).collect();
    let total: f64 = draws.iter().sum();
    if total > 0.0 && total.is_finite() {
        draws.into_iter().map(|g| g / total).collect()
    } else {
        let mut p = vec![0.0; classes];
        p[rng.random_range(0..classes)] = 1.0;
        p
    }
}

/// Splits `total` into integer parts proportional to `weights`, capped at
/// `caps`, by largest remainder (lowest index wins ties). The returned parts
/// sum to `min(total, sum of caps over positive weights)`.
fn apportion(total: usize, weights: &[f64], caps: &[usize]) -> Vec<usize> {
    let wsum: f64 = weights.iter().sum();
    let mut parts = vec![0usize; weights.len()];
    if wsum <= 0.0 || total == 0 {
        return parts;
    }
    let exact: Vec<f64> = weights.iter().map(|w| total as f64 * w / wsum).collect();
    for (p, (e, cap)) in parts.iter_mut().zip(exact.iter().zip(caps)) {
        *p = (e.floor() as usize).min(*cap);
    }
    let mut assigned: usize = parts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).filter(|&i| weights[i] > 0.0).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.partial_cmp(&ra).expect("finite").then(a.cmp(&b))
    });
    while assigned < total {
        let mut progressed = false;
        for &i in &order {
            if assigned == total {
                break;
            }
            if parts[i] < caps[i] {
                parts[i] += 1;
                assigned += 1;
                progressed = true;
            }
        }
        if !progressed {
            break;
        }
    }
    parts
}

/// Partitions `pool` into `spec.clients` datasets of exactly
/// `spec.samples_per_client` items each, with per-client class proportions
/// drawn from a symmetric Dirichlet(alpha). Items are taken without
/// replacement. When a class runs out, the remaining quota is spread over
/// the classes that still have stock, proportionally to the client's draw.
pub fn dirichlet_partition(
    pool: &Dataset,
    spec: &PartitionSpec,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Dataset>> {
    if spec.alpha.is_nan() || spec.alpha <= 0.0 {
        return Err(EhflError::Partition(format!(
            "alpha must be positive, got {}",
            spec.alpha
        )));
    }
    if spec.clients * spec.samples_per_client > pool.len() {
        return Err(EhflError::Partition(format!(
            "{} clients x {} samples exceed a pool of {}",
            spec.clients,
            spec.samples_per_client,
            pool.len()
        )));
    }
    let classes = pool.classes();
    let mut stock: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, &y) in pool.labels().iter().enumerate() {
        stock[y].push(i);
    }
    for s in &mut stock {
        s.shuffle(rng);
    }

    let mut out = Vec::with_capacity(spec.clients);
    for client in 0..spec.clients {
        let props = dirichlet_proportions(spec.alpha, classes, rng);
        let mut taken = Vec::with_capacity(spec.samples_per_client);
        let mut remaining = spec.samples_per_client;
        let mut weights = props.clone();
        while remaining > 0 {
            let caps: Vec<usize> = stock.iter().map(Vec::len).collect();
            for (w, &cap) in weights.iter_mut().zip(&caps) {
                if cap == 0 {
                    *w = 0.0;
                }
            }
            if weights.iter().all(|&w| w <= 0.0) {
                weights = caps.iter().map(|&c| c as f64).collect();
            }
            let parts = apportion(remaining, &weights, &caps);
            let got: usize = parts.iter().sum();
            if got == 0 {
                return Err(EhflError::Partition(format!(
                    "pool exhausted while filling client {client}"
                )));
            }
            for (c, n) in parts.into_iter().enumerate() {
                let s = &mut stock[c];
                taken.extend(s.drain(s.len() - n..));
            }
            remaining -= got;
        }
        taken.sort_unstable();
        out.push(pool.subset(&taken));
    }
    Ok(out)
}

/// Without-replacement minibatch sweep over one client's dataset, reshuffled
/// at every sweep boundary. Leftover rows that cannot fill a whole batch at
/// the end of a sweep are skipped.
#[derive(Debug, Clone)]
pub struct BatchStream {
    order: Vec<usize>,
    cursor: usize,
    rng: ChaCha8Rng,
}

impl BatchStream {
    pub fn new(n: usize, mut rng: ChaCha8Rng) -> Self {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        BatchStream {
            order,
            cursor: 0,
            rng,
        }
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    /// Indices of the next batch.
    pub fn next_indices(&mut self, batch_size: usize) -> &[usize] {
        assert!(
            batch_size >= 1 && batch_size <= self.order.len(),
            "batch size {batch_size} outside 1..={}",
            self.order.len()
        );
        if self.cursor + batch_size > self.order.len() {
            self.order.shuffle(&mut self.rng);
            self.cursor = 0;
        }
        let start = self.cursor;
        self.cursor += batch_size;
        &self.order[start..start + batch_size]
    }

    pub fn next_batch(&mut self, data: &Dataset, batch_size: usize) -> Minibatch {
        let idx = self.next_indices(batch_size).to_vec();
        data.select(&idx)
    }
}
