//! Finite Cayley subtrees at desk scale.
//!
//! A certified positive fixed point `phi` induces a tree-indexed Markov
//! chain: the root spin is drawn from `rho(t) ~ phi(t)^d0` (with `d0` the
//! root degree) and each child from the transition density
//! `P(u|t) = K(t,u) phi^k(u) / phi(t)`, which integrates to one precisely
//! because `phi` is a fixed point. This module draws exact samples from
//! that chain, estimates order-parameter observables, and checks the
//! construction against the finite-volume Gibbs weights by brute-force
//! tensor quadrature on volumes small enough to integrate directly.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::hammerstein::{
    hammerstein_residual, ClosedFormDensity, DensityRef, LIFT_RESIDUAL_TOL, POSITIVITY_TOL,
};
use crate::kernel::{basis_unchecked, kernel_unchecked, ModelParams};
use crate::quadrature::{integrate_unit, QuadratureRule};

/// Deepest ball that may be built at all.
pub const MAX_DEPTH: usize = 8;

/// Largest spin count the brute-force volume integrals accept.
pub const MAX_TENSOR_SPINS: usize = 12;

/// Nodes in the sampling CDF grid.
const CDF_GRID: usize = 4097;

/// Degree of the root vertex of the finite ball.
///
/// On the full tree the origin has `k + 1` neighbors, all successors; the
/// rooted recursion behind the consistency equation sees only `k`
/// successors per vertex. Both conventions are supported and the
/// brute-force check tells them apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RootDegree {
    /// `k + 1` children at the root (the tree's true root degree).
    Full,
    /// `k` children at the root (the rooted recursion).
    Rooted,
}

impl RootDegree {
    pub fn degree(self, k: usize) -> usize {
        match self {
            RootDegree::Full => k + 1,
            RootDegree::Rooted => k,
        }
    }
}

/// Shape of a finite ball: depth, branching order, and root convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeSpec {
    depth: usize,
    branching: usize,
    root_degree: RootDegree,
}

impl TreeSpec {
    pub fn new(depth: usize, branching: usize, root_degree: RootDegree) -> Result<Self> {
        if depth == 0 || depth > MAX_DEPTH {
            return Err(Error::DepthLimit {
                depth,
                limit: MAX_DEPTH,
            });
        }
        if branching < 2 {
            return Err(Error::InvalidParams(format!(
                "branching = {branching}, need >= 2"
            )));
        }
        Ok(Self {
            depth,
            branching,
            root_degree,
        })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn branching(&self) -> usize {
        self.branching
    }

    pub fn root_degree(&self) -> RootDegree {
        self.root_degree
    }

    /// `1 + d0 (k^depth - 1)/(k - 1)` vertices.
    pub fn vertex_count(&self) -> usize {
        let k = self.branching;
        let d0 = self.root_degree.degree(k);
        let mut shell = d0;
        let mut total = 1;
        for _ in 0..self.depth {
            total += shell;
            shell *= k;
        }
        total
    }
}

/// Vertices of a ball in breadth-first order; parents precede children.
#[derive(Debug, Clone)]
pub struct TreeTopology {
    parents: Vec<usize>,
    levels: Vec<usize>,
}

impl TreeTopology {
    pub fn build(spec: &TreeSpec) -> Self {
        let k = spec.branching;
        let mut parents = vec![usize::MAX];
        let mut levels = vec![0usize];
        let mut frontier = vec![0usize];
        for level in 1..=spec.depth {
            let children_per = if level == 1 {
                spec.root_degree.degree(k)
            } else {
                k
            };
            let mut next = Vec::with_capacity(frontier.len() * children_per);
            for &v in &frontier {
                for _ in 0..children_per {
                    next.push(parents.len());
                    parents.push(v);
                    levels.push(level);
                }
            }
            frontier = next;
        }
        Self { parents, levels }
    }

    pub fn len(&self) -> usize {
        self.parents.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Parent of a non-root vertex.
    pub fn parent(&self, v: usize) -> usize {
        self.parents[v]
    }

    pub fn level(&self, v: usize) -> usize {
        self.levels[v]
    }

    pub fn max_level(&self) -> usize {
        *self.levels.last().unwrap()
    }
}

/// A spin assignment on a finite ball, indexed like its topology.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    pub spins: Vec<f64>,
}

/// A certified positive fixed point together with its lift
/// `f(t) = (phi(t)/phi(0))^k`, the boundary weight of the finite-volume
/// construction.
#[derive(Debug, Clone)]
pub struct BoundaryField {
    density: ClosedFormDensity,
    phi0: f64,
}

impl BoundaryField {
    /// Certifies the density: strict positivity and Hammerstein residual
    /// below the lift tolerance.
    pub fn new(density: ClosedFormDensity) -> Result<Self> {
        if !density.is_strictly_positive() {
            return Err(Error::NotPositive {
                min: density.min_value(),
            });
        }
        let residual = hammerstein_residual(DensityRef::Closed(&density), 129)?;
        if residual > LIFT_RESIDUAL_TOL {
            return Err(Error::NotCertified(format!(
                "Hammerstein residual {residual:e} exceeds {LIFT_RESIDUAL_TOL:e}"
            )));
        }
        let phi0 = density.eval(0.0);
        Ok(Self { density, phi0 })
    }

    pub fn density(&self) -> &ClosedFormDensity {
        &self.density
    }

    pub fn params(&self) -> &ModelParams {
        &self.density.params
    }

    pub fn phi(&self, t: f64) -> f64 {
        self.density.eval(t)
    }

    /// The lifted boundary weight `f(t) = (phi(t)/phi(0))^k`; `f(0) = 1`.
    pub fn lifted(&self, t: f64) -> f64 {
        (self.density.eval(t) / self.phi0).powi(self.density.params.k() as i32)
    }
}

/// The child transition density `P(u|t) = K(t,u) phi^k(u) / phi(t)`.
///
/// A probability density in `u` for every `t`, because `(H_k phi)(t)
/// = phi(t)`.
pub fn transition_density(field: &BoundaryField, parent_spin: f64, child_spin: f64) -> Result<f64> {
    for (name, v) in [("parent_spin", parent_spin), ("child_spin", child_spin)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Domain { name, value: v });
        }
    }
    let phi_t = field.phi(parent_spin);
    if phi_t <= POSITIVITY_TOL {
        return Err(Error::NotPositive { min: phi_t });
    }
    let params = field.params();
    let k = params.k() as i32;
    Ok(kernel_unchecked(params.theta(), parent_spin, child_spin)
        * field.phi(child_spin).powi(k)
        / phi_t)
}

/// Inverse-CDF sampler for the tree-indexed chain.
///
/// The kernel is rank one in the substituted variable, so the transition
/// CDF given any parent spin `t` is a fixed pair of cumulative integrals
/// combined with the scalar `theta*e(t)`:
///
/// ```text
/// F(w | t)  ~  G1(w) + theta*e(t) * G2(w)
/// ```
///
/// `G1`, `G2` and the root CDF are accumulated once per field on a
/// uniform grid in `w` (where all three integrands are polynomial) and
/// inverted per draw by binary search with monotone linear interpolation.
pub struct TreeSampler {
    field: BoundaryField,
    topology: TreeTopology,
    spec: TreeSpec,
    w_grid: Vec<f64>,
    g1: Vec<f64>,
    g2: Vec<f64>,
    root_cdf: Vec<f64>,
}

impl TreeSampler {
    pub fn new(field: &BoundaryField, spec: &TreeSpec) -> Result<Self> {
        let params = field.params();
        if spec.branching() != params.k() {
            return Err(Error::InvalidParams(format!(
                "tree branching {} does not match model k = {}",
                spec.branching(),
                params.k()
            )));
        }
        let n = CDF_GRID;
        let w_grid: Vec<f64> = (0..n)
            .map(|j| -1.0 + 2.0 * j as f64 / (n - 1) as f64)
            .collect();
        let cell_rule = QuadratureRule::gauss_legendre(8)?;
        let k = params.k() as i32;
        let d0 = spec.root_degree().degree(params.k()) as i32;
        // e(u)/cbrt(4) = w / cbrt(2) under the substitution.
        let inv_cbrt2 = 0.5_f64.cbrt();
        let mut g1 = vec![0.0; n];
        let mut g2 = vec![0.0; n];
        let mut root_cdf = vec![0.0; n];
        for j in 1..n {
            let (a, b) = (w_grid[j - 1], w_grid[j]);
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            let (mut d1, mut d2, mut dr) = (0.0, 0.0, 0.0);
            for (&xi, &lam) in cell_rule.nodes().iter().zip(cell_rule.weights()) {
                let w = mid + half * xi;
                let jac = 1.5 * w * w * lam * half;
                let phi_w = field.phi(0.5 + 0.5 * w * w * w);
                let phik = phi_w.powi(k);
                d1 += jac * phik;
                d2 += jac * phik * w * inv_cbrt2;
                dr += jac * phi_w.powi(d0);
            }
            g1[j] = g1[j - 1] + d1;
            g2[j] = g2[j - 1] + d2;
            root_cdf[j] = root_cdf[j - 1] + dr;
        }
        Ok(Self {
            field: field.clone(),
            topology: TreeTopology::build(spec),
            spec: *spec,
            w_grid,
            g1,
            g2,
            root_cdf,
        })
    }

    pub fn topology(&self) -> &TreeTopology {
        &self.topology
    }

    pub fn spec(&self) -> &TreeSpec {
        &self.spec
    }

    /// Inverts the monotone grid CDF `cum` at `target`, interpolating
    /// linearly inside the bracketing cell, and maps `w` back to `[0, 1]`.
    fn invert<C: Fn(usize) -> f64>(&self, cum: C, target: f64) -> f64 {
        let n = self.w_grid.len();
        if target <= 0.0 {
            return 0.0;
        }
        if target >= cum(n - 1) {
            return 1.0;
        }
        let (mut lo, mut hi) = (0usize, n - 1);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if cum(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (c_lo, c_hi) = (cum(lo), cum(hi));
        let frac = if c_hi > c_lo {
            (target - c_lo) / (c_hi - c_lo)
        } else {
            1.0
        };
        let w = self.w_grid[lo] + frac * (self.w_grid[hi] - self.w_grid[lo]);
        (0.5 + 0.5 * w * w * w).clamp(0.0, 1.0)
    }

    fn draw_root(&self, rng: &mut ChaCha8Rng) -> f64 {
        let total = *self.root_cdf.last().unwrap();
        let v: f64 = rng.random();
        self.invert(|j| self.root_cdf[j], v * total)
    }

    fn draw_child(&self, parent_spin: f64, rng: &mut ChaCha8Rng) -> f64 {
        let c = self.field.params().theta() * basis_unchecked(parent_spin);
        let n = self.w_grid.len();
        let total = self.g1[n - 1] + c * self.g2[n - 1];
        let v: f64 = rng.random();
        self.invert(|j| self.g1[j] + c * self.g2[j], v * total)
    }

    /// Draws the sample with the given index. Every vertex consumes
    /// exactly one variate from a per-sample stream, so samples are
    /// reproducible independently of batching.
    pub fn draw(&self, seed: u64, index: u64) -> Configuration {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        let n = self.topology.len();
        let mut spins = Vec::with_capacity(n);
        spins.push(self.draw_root(&mut rng));
        for v in 1..n {
            let parent = self.topology.parent(v);
            spins.push(self.draw_child(spins[parent], &mut rng));
        }
        Configuration { spins }
    }
}

/// Draws `n_samples` configurations of the tree-indexed chain.
/// Deterministic in `(seed, spec, field)`.
pub fn sample_tree(
    field: &BoundaryField,
    spec: &TreeSpec,
    seed: u64,
    n_samples: usize,
) -> Result<Vec<Configuration>> {
    sample_tree_jobs(field, spec, seed, n_samples, 1)
}

/// [`sample_tree`] on `jobs` worker threads. Per-sample streams make the
/// output identical for every job count.
pub fn sample_tree_jobs(
    field: &BoundaryField,
    spec: &TreeSpec,
    seed: u64,
    n_samples: usize,
    jobs: usize,
) -> Result<Vec<Configuration>> {
    if n_samples == 0 {
        return Err(Error::InvalidInput("n_samples must be at least 1".into()));
    }
    let sampler = TreeSampler::new(field, spec)?;
    let jobs = jobs.max(1).min(n_samples);
    if jobs == 1 {
        return Ok((0..n_samples as u64)
            .map(|i| sampler.draw(seed, i))
            .collect());
    }
    let chunk = n_samples.div_ceil(jobs);
    let mut out = Vec::with_capacity(n_samples);
    std::thread::scope(|scope| {
        let sampler = &sampler;
        let handles: Vec<_> = (0..jobs)
            .map(|j| {
                let lo = j * chunk;
                let hi = ((j + 1) * chunk).min(n_samples);
                scope.spawn(move || {
                    (lo as u64..hi as u64)
                        .map(|i| sampler.draw(seed, i))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            out.extend(h.join().expect("sampler worker panicked"));
        }
    });
    Ok(out)
}

/// Root-spin observables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observable {
    /// `sigma(root)` itself.
    MeanSpin,
    /// The order parameter `e(sigma(root))`.
    MeanBasis,
}

impl Observable {
    pub fn name(self) -> &'static str {
        match self {
            Observable::MeanSpin => "mean_spin",
            Observable::MeanBasis => "mean_basis",
        }
    }
}

/// Sample mean and standard error of an observable.
#[derive(Debug, Clone, Copy)]
pub struct ObservableEstimate {
    pub estimate: f64,
    /// Undefined (None) for a single sample.
    pub std_error: Option<f64>,
}

/// Estimates an observable over the root spins of the samples.
pub fn observable(samples: &[Configuration], which: Observable) -> Result<ObservableEstimate> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("no samples".into()));
    }
    let values: Vec<f64> = samples
        .iter()
        .map(|c| match which {
            Observable::MeanSpin => c.spins[0],
            Observable::MeanBasis => basis_unchecked(c.spins[0]),
        })
        .collect();
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std_error = (values.len() > 1).then(|| {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    });
    Ok(ObservableEstimate {
        estimate: mean,
        std_error,
    })
}

/// Quadrature expectation of `e(sigma(root))` under the root marginal
/// `rho ~ phi^d0`; the oracle the Monte Carlo estimates are checked
/// against.
pub fn expected_basis(field: &BoundaryField, root_degree: RootDegree) -> Result<f64> {
    let rule = QuadratureRule::gauss_legendre(64)?;
    let d0 = root_degree.degree(field.params().k()) as i32;
    let numer = integrate_unit(|t| basis_unchecked(t) * field.phi(t).powi(d0), &rule)?;
    let denom = integrate_unit(|t| field.phi(t).powi(d0), &rule)?;
    Ok(numer / denom)
}

/// Writes samples as `sample,vertex,depth,spin` rows.
pub fn write_samples_csv<W: Write>(
    out: &mut W,
    topology: &TreeTopology,
    samples: &[Configuration],
    comments: &[String],
) -> std::io::Result<()> {
    for line in comments {
        writeln!(out, "# {line}")?;
    }
    writeln!(out, "sample,vertex,depth,spin")?;
    for (i, cfg) in samples.iter().enumerate() {
        for (v, spin) in cfg.spins.iter().enumerate() {
            writeln!(
                out,
                "{i},{v},{},{}",
                topology.level(v),
                crate::fmt_float(*spin)
            )?;
        }
    }
    Ok(())
}

/// Result of the brute-force finite-volume check.
#[derive(Debug, Clone, Copy)]
pub struct DlrReport {
    /// Sup over inner configurations of the difference between the
    /// marginalized depth-n density and the depth-(n-1) density.
    pub compatibility_discrepancy: f64,
    /// Sup over full configurations of the difference between the
    /// finite-volume Gibbs density and the Markov-chain density.
    pub markov_discrepancy: f64,
    pub volume_spins: usize,
    pub effective_order: usize,
}

/// Sums `f` over the full tensor grid `{0..n_points}^dims` of index
/// tuples.
fn tensor_sum<F: FnMut(&[usize]) -> f64>(dims: usize, n_points: usize, mut f: F) -> f64 {
    let mut idx = vec![0usize; dims];
    let mut acc = 0.0;
    loop {
        acc += f(&idx);
        let mut d = 0;
        loop {
            if d == dims {
                return acc;
            }
            idx[d] += 1;
            if idx[d] < n_points {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

/// Brute-force consistency check on a small volume.
///
/// Both discrepancies are between normalized densities:
///
/// * the depth-n Gibbs density (edge kernels times boundary weights on the
///   outer shell, normalized by tensor quadrature) marginalized over the
///   shell, against the depth-(n-1) density — for depth 1 the inner
///   density is the root marginal `rho ~ phi^d0`, the one convention the
///   infinite-volume formulas do not dictate;
/// * the depth-n Gibbs density against the Markov-chain density
///   `rho(root) * prod P(child|parent)`.
///
/// The tensor order is reduced automatically on volumes above 5 spins;
/// the integrands are polynomial in the substituted variables with small
/// per-dimension degree, so the reduced rules remain exact.
pub fn dlr_check(
    field: &BoundaryField,
    spec: &TreeSpec,
    quadrature_order: usize,
) -> Result<DlrReport> {
    let params = field.params();
    if spec.branching() != params.k() {
        return Err(Error::InvalidParams(format!(
            "tree branching {} does not match model k = {}",
            spec.branching(),
            params.k()
        )));
    }
    let topo = TreeTopology::build(spec);
    let spins = topo.len();
    if spins > MAX_TENSOR_SPINS {
        return Err(Error::DimensionLimit {
            spins,
            limit: MAX_TENSOR_SPINS,
        });
    }
    let q_eff = match spins {
        0..=5 => quadrature_order,
        6..=8 => quadrature_order.min(10),
        _ => quadrature_order.min(6),
    };
    let rule = QuadratureRule::gauss_legendre(q_eff)?;
    let nodes = rule.unit_nodes_weights();
    let q = nodes.len();
    let theta = params.theta();
    let depth = spec.depth();
    let d0 = spec.root_degree().degree(params.k()) as i32;

    // Per-node tables: boundary weight, pairwise kernel, tensor weight.
    let f_tab: Vec<f64> = nodes.iter().map(|&(u, _)| field.lifted(u)).collect();
    let k_tab: Vec<Vec<f64>> = nodes
        .iter()
        .map(|&(t, _)| {
            nodes
                .iter()
                .map(|&(u, _)| kernel_unchecked(theta, t, u))
                .collect()
        })
        .collect();
    let wt_tab: Vec<f64> = nodes.iter().map(|&(_, w)| w).collect();

    let weight_by_index = |idx: &[usize]| -> f64 {
        let mut w = 1.0;
        for v in 1..spins {
            w *= k_tab[idx[topo.parent(v)]][idx[v]];
        }
        for v in 0..spins {
            if topo.level(v) == depth {
                w *= f_tab[idx[v]];
            }
        }
        w
    };

    let z_n = tensor_sum(spins, q, |idx| {
        let mut wt = 1.0;
        for &i in idx {
            wt *= wt_tab[i];
        }
        wt * weight_by_index(idx)
    });

    // Inner volume: the ball of depth n-1.
    let inner_topo;
    let inner_spins;
    if depth == 1 {
        inner_topo = None;
        inner_spins = 1;
    } else {
        let inner_spec = TreeSpec::new(depth - 1, spec.branching(), spec.root_degree())?;
        let t = TreeTopology::build(&inner_spec);
        inner_spins = t.len();
        inner_topo = Some(t);
    }

    // Unnormalized inner weight on grid values.
    let inner_weight = |vals: &[f64]| -> f64 {
        match &inner_topo {
            None => field.phi(vals[0]).powi(d0),
            Some(t) => {
                let mut w = 1.0;
                for v in 1..inner_spins {
                    w *= kernel_unchecked(theta, vals[t.parent(v)], vals[v]);
                }
                for v in 0..inner_spins {
                    if t.level(v) == depth - 1 {
                        w *= field.lifted(vals[v]);
                    }
                }
                w
            }
        }
    };

    let marginal_rule = QuadratureRule::gauss_legendre(64)?;
    let z_inner = match &inner_topo {
        None => integrate_unit(|t| field.phi(t).powi(d0), &marginal_rule)?,
        Some(_) => tensor_sum(inner_spins, q, |idx| {
            let mut wt = 1.0;
            let mut vals = [0.0f64; MAX_TENSOR_SPINS];
            for (d, &i) in idx.iter().enumerate() {
                wt *= wt_tab[i];
                vals[d] = nodes[i].0;
            }
            wt * inner_weight(&vals[..inner_spins])
        }),
    };

    // Shell vertices and their (inner) parents, in tensor-dimension order.
    let shell: Vec<usize> = (0..spins).filter(|&v| topo.level(v) == depth).collect();
    let shell_parent: Vec<usize> = shell.iter().map(|&v| topo.parent(v)).collect();

    // Compatibility: marginalize the shell over the quadrature nodes for
    // every inner grid configuration.
    let inner_grid = crate::hammerstein::SampledDensity::chebyshev_grid(if inner_spins == 1 {
        65
    } else {
        5
    });
    let g = inner_grid.len();
    let k_grid_node: Vec<Vec<f64>> = inner_grid
        .iter()
        .map(|&t| {
            nodes
                .iter()
                .map(|&(u, _)| kernel_unchecked(theta, t, u))
                .collect()
        })
        .collect();

    let mut compat_sup: f64 = 0.0;
    tensor_sum(inner_spins, g, |inner_idx| {
        let mut vals = [0.0f64; MAX_TENSOR_SPINS];
        for (d, &i) in inner_idx.iter().enumerate() {
            vals[d] = inner_grid[i];
        }
        let inner_vals = &vals[..inner_spins];
        // Inner-volume edge/boundary weight of the depth-n density for the
        // fixed inner values.
        let mut base = 1.0;
        if let Some(t) = &inner_topo {
            for v in 1..inner_spins {
                base *= kernel_unchecked(theta, inner_vals[t.parent(v)], inner_vals[v]);
            }
        }
        let marginal = base
            * tensor_sum(shell.len(), q, |shell_idx| {
                let mut w = 1.0;
                for (s, &i) in shell_idx.iter().enumerate() {
                    w *= wt_tab[i] * k_grid_node[inner_idx[shell_parent[s]]][i] * f_tab[i];
                }
                w
            });
        let diff = (marginal / z_n - inner_weight(inner_vals) / z_inner).abs();
        if diff > compat_sup {
            compat_sup = diff;
        }
        0.0
    });

    // Gibbs vs Markov on a full-volume grid.
    let full_grid =
        crate::hammerstein::SampledDensity::chebyshev_grid(if spins <= 4 { 9 } else { 3 });
    let fg = full_grid.len();
    let rho_norm = integrate_unit(|t| field.phi(t).powi(d0), &marginal_rule)?;
    let mut markov_sup: f64 = 0.0;
    tensor_sum(spins, fg, |idx| {
        let mut vals = [0.0f64; MAX_TENSOR_SPINS];
        for (d, &i) in idx.iter().enumerate() {
            vals[d] = full_grid[i];
        }
        let vals = &vals[..spins];
        let mut gibbs = 1.0;
        for v in 1..spins {
            gibbs *= kernel_unchecked(theta, vals[topo.parent(v)], vals[v]);
        }
        for v in 0..spins {
            if topo.level(v) == depth {
                gibbs *= field.lifted(vals[v]);
            }
        }
        gibbs /= z_n;
        let mut markov = field.phi(vals[0]).powi(d0) / rho_norm;
        for v in 1..spins {
            let t = vals[topo.parent(v)];
            markov *= kernel_unchecked(theta, t, vals[v])
                * field.phi(vals[v]).powi(params.k() as i32)
                / field.phi(t);
        }
        let diff = (gibbs - markov).abs();
        if diff > markov_sup {
            markov_sup = diff;
        }
        0.0
    });

    Ok(DlrReport {
        compatibility_discrepancy: compat_sup,
        markov_discrepancy: markov_sup,
        volume_spins: spins,
        effective_order: q_eff,
    })
}
