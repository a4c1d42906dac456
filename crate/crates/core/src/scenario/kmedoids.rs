//! Partitioning around medoids with seeded k-medoids++ initialization.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Dense symmetric distance matrix.
#[derive(Debug, Clone)]
pub struct Distances {
    n: usize,
    d: Vec<f64>,
}

impl Distances {
    pub fn euclidean(points: &[Vec<f64>]) -> Self {
        let n = points.len();
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let s: f64 = points[i]
                    .iter()
                    .zip(&points[j])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                let v = s.sqrt();
                d[i * n + j] = v;
                d[j * n + i] = v;
            }
        }
        Distances { n, d }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n + j]
    }

    /// Total distance of every point to its nearest medoid.
    pub fn cost(&self, medoids: &[usize]) -> f64 {
        (0..self.n)
            .map(|j| {
                medoids
                    .iter()
                    .map(|&m| self.get(j, m))
                    .fold(f64::INFINITY, f64::min)
            })
            .sum()
    }

    /// Index into `medoids` of the nearest medoid; ties go to the first.
    pub fn nearest(&self, j: usize, medoids: &[usize]) -> usize {
        let mut best = 0;
        for (c, &m) in medoids.iter().enumerate() {
            if self.get(j, m) < self.get(j, medoids[best]) {
                best = c;
            }
        }
        best
    }
}

fn seed_medoids(dist: &Distances, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = dist.len();
    let mut medoids = vec![rng.gen_range(0..n)];
    let mut near: Vec<f64> = (0..n).map(|j| dist.get(j, medoids[0])).collect();
    while medoids.len() < k {
        let total: f64 = near.iter().map(|d| d * d).sum();
        let pick = if total > 0.0 {
            let mut r = rng.gen::<f64>() * total;
            let mut pick = None;
            for (j, d) in near.iter().enumerate() {
                let w = d * d;
                if w > 0.0 {
                    pick = Some(j);
                    if r < w {
                        break;
                    }
                    r -= w;
                }
            }
            pick.expect("positive total weight")
        } else {
            // Remaining points coincide with medoids; take the first unused.
            (0..n).find(|j| !medoids.contains(j)).expect("k <= n")
        };
        medoids.push(pick);
        for (j, nj) in near.iter_mut().enumerate() {
            *nj = nj.min(dist.get(j, pick));
        }
    }
    medoids
}

/// Runs best-improvement PAM swaps from a seeded build. Returns sorted medoids.
pub fn pam(dist: &Distances, k: usize, seed: u64) -> Result<Vec<usize>> {
    let n = dist.len();
    if k == 0 || k > n {
        return Err(Error::Parameter(format!("k must be in 1..={n}, got {k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut medoids = seed_medoids(dist, k, &mut rng);
    let mut is_medoid = vec![false; n];
    for &m in &medoids {
        is_medoid[m] = true;
    }
    let scale: f64 = dist.cost(&medoids).max(1.0);
    loop {
        // Nearest and second-nearest distances for the delta formula.
        let mut d1 = vec![f64::INFINITY; n];
        let mut d2 = vec![f64::INFINITY; n];
        let mut c1 = vec![0usize; n];
        for j in 0..n {
            for (c, &m) in medoids.iter().enumerate() {
                let v = dist.get(j, m);
                if v < d1[j] {
                    d2[j] = d1[j];
                    d1[j] = v;
                    c1[j] = c;
                } else if v < d2[j] {
                    d2[j] = v;
                }
            }
        }
        let mut best: Option<(f64, usize, usize)> = None;
        for c in 0..k {
            for h in 0..n {
                if is_medoid[h] {
                    continue;
                }
                let mut delta = 0.0;
                for j in 0..n {
                    let dh = dist.get(j, h);
                    delta += if c1[j] == c {
                        dh.min(d2[j]) - d1[j]
                    } else {
                        dh.min(d1[j]) - d1[j]
                    };
                }
                if best.is_none_or(|(b, _, _)| delta < b) {
                    best = Some((delta, c, h));
                }
            }
        }
        match best {
            Some((delta, c, h)) if delta < -1e-12 * scale => {
                is_medoid[medoids[c]] = false;
                is_medoid[h] = true;
                medoids[c] = h;
            }
            _ => break,
        }
    }
    medoids.sort_unstable();
    Ok(medoids)
}

/// True when no single (medoid, non-medoid) swap lowers the total cost.
pub fn is_swap_optimal(dist: &Distances, medoids: &[usize], tol: f64) -> bool {
    let base = dist.cost(medoids);
    let mut trial = medoids.to_vec();
    for c in 0..medoids.len() {
        for h in 0..dist.len() {
            if medoids.contains(&h) {
                continue;
            }
            trial[c] = h;
            if dist.cost(&trial) < base - tol {
                return false;
            }
            trial[c] = medoids[c];
        }
    }
    true
}
