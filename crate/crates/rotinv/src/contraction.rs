//! Contraction diagrams over polynomial parts.
//!
//! A [`ContractionGraph`] is a multigraph whose vertices name homogeneous
//! parts (a polynomial slot plus a degree) and whose edges pair up index
//! slots; a vertex of degree `d` has exactly `d` edge endpoints, so the
//! graph is fully contracted by construction. Evaluating a graph sums, over
//! all assignments of an index in `1..=n` to each edge, the product of the
//! symmetric coefficients collected at each vertex. Orthogonal coordinate
//! changes cancel along every edge, which makes each connected graph a
//! rotation invariant of the referenced polynomials.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::tensor_poly::Polynomial;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Vertex-count cap for brute-force canonicalization.
pub const CANONICAL_VERTEX_CAP: usize = 8;

/// Cap on total index slots (twice the edge count) for enumeration.
pub const ENUMERATION_SLOT_CAP: usize = 24;

/// Largest dense tensor evaluation will materialize (elements).
pub const DENSE_TENSOR_CAP: u128 = 1 << 24;

/// A vertex: which polynomial slot it refers to and the degree of the part.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PartRef {
    pub poly: usize,
    pub degree: usize,
}

/// A fully contracted multigraph over polynomial parts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContractionGraph {
    vertices: Vec<PartRef>,
    edges: Vec<(usize, usize)>,
}

impl ContractionGraph {
    /// Validates that every edge endpoint exists and that each vertex has
    /// exactly as many endpoints as the degree of its part (self-loops
    /// count twice).
    pub fn new(vertices: Vec<PartRef>, edges: Vec<(usize, usize)>) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::EmptySpec);
        }
        let mut endpoints = vec![0usize; vertices.len()];
        let mut normalized = Vec::with_capacity(edges.len());
        for (a, b) in edges {
            if a >= vertices.len() || b >= vertices.len() {
                return Err(Error::DanglingEdge {
                    a,
                    b,
                    vertices: vertices.len(),
                });
            }
            endpoints[a] += 1;
            endpoints[b] += 1;
            normalized.push((a.min(b), a.max(b)));
        }
        normalized.sort_unstable();
        for (v, count) in endpoints.iter().enumerate() {
            if *count != vertices[v].degree {
                return Err(Error::SlotMismatch {
                    vertex: v,
                    endpoints: *count,
                    degree: vertices[v].degree,
                });
            }
        }
        Ok(Self {
            vertices,
            edges: normalized,
        })
    }

    /// Two degree-`d` vertices joined by `d` parallel edges.
    pub fn two_vertex(degree: usize, poly_a: usize, poly_b: usize) -> Self {
        let vertices = vec![
            PartRef {
                poly: poly_a,
                degree,
            },
            PartRef {
                poly: poly_b,
                degree,
            },
        ];
        let edges = vec![(0, 1); degree];
        Self::new(vertices, edges).expect("two-vertex graph is always valid")
    }

    /// A cycle of `len` degree-2 vertices; `len = 1` is the trace self-loop.
    pub fn cycle(len: usize, poly: usize) -> Self {
        assert!(len >= 1);
        let vertices = vec![PartRef { poly, degree: 2 }; len];
        let edges = (0..len).map(|i| (i, (i + 1) % len)).collect();
        Self::new(vertices, edges).expect("cycle graph is always valid")
    }

    pub fn vertices(&self) -> &[PartRef] {
        &self.vertices
    }

    /// Edges normalized to `(min, max)` and sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn is_connected(&self) -> bool {
        let v = self.vertices.len();
        if v == 0 {
            return true;
        }
        let mut seen = vec![false; v];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for &(a, b) in &self.edges {
                let other = if a == u {
                    b
                } else if b == u {
                    a
                } else {
                    continue;
                };
                if !seen[other] {
                    seen[other] = true;
                    stack.push(other);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Permutation-minimal encoding; equal forms identify isomorphic graphs.
    pub fn canonicalize(&self) -> Result<CanonicalForm> {
        let v = self.vertices.len();
        if v > CANONICAL_VERTEX_CAP {
            return Err(Error::TooManyVertices {
                vertices: v,
                limit: CANONICAL_VERTEX_CAP,
            });
        }
        let labels_of = |i: usize| (self.vertices[i].degree, self.vertices[i].poly);
        let mut order: Vec<usize> = (0..v).collect();
        order.sort_by_key(|&i| labels_of(i));
        let labels: Vec<(usize, usize)> = order.iter().map(|&i| labels_of(i)).collect();

        // Group canonical positions that share a label; any assignment of the
        // matching original vertices onto those positions is admissible.
        let mut groups: Vec<(usize, usize)> = Vec::new(); // (start, end) position ranges
        let mut start = 0;
        for pos in 1..=v {
            if pos == v || labels[pos] != labels[start] {
                groups.push((start, pos));
                start = pos;
            }
        }

        let mut best: Option<Vec<(usize, usize)>> = None;
        let mut perm = vec![0usize; v]; // original vertex -> canonical position
        search_assignments(
            &groups,
            0,
            &order,
            &mut perm,
            &mut |perm: &[usize]| {
                let mut edges: Vec<(usize, usize)> = self
                    .edges
                    .iter()
                    .map(|&(a, b)| {
                        let (x, y) = (perm[a], perm[b]);
                        (x.min(y), x.max(y))
                    })
                    .collect();
                edges.sort_unstable();
                if best.as_ref().is_none_or(|b| edges < *b) {
                    best = Some(edges);
                }
            },
        );

        Ok(CanonicalForm {
            labels,
            edges: best.expect("at least one assignment exists"),
        })
    }

    /// Canonical one-line spec string, e.g. `3:p,3:p ; 0-1,0-1,0-1`.
    pub fn canonical_spec(&self) -> Result<String> {
        Ok(self.canonicalize()?.to_graph().to_spec_string())
    }

    /// Render the declaration-order spec line for this graph.
    pub fn to_spec_string(&self) -> String {
        let verts: Vec<String> = self
            .vertices
            .iter()
            .map(|v| format!("{}:{}", v.degree, slot_name(v.poly)))
            .collect();
        let edges: Vec<String> = self
            .edges
            .iter()
            .map(|(a, b)| format!("{a}-{b}"))
            .collect();
        if edges.is_empty() {
            format!("{} ;", verts.join(","))
        } else {
            format!("{} ; {}", verts.join(","), edges.join(","))
        }
    }

    /// Parse a one-line spec: `deg:poly,deg:poly,... ; i-j,i-j,...`.
    ///
    /// Polynomial names map to slots in order of first appearance.
    pub fn parse(line: &str) -> Result<Self> {
        let mut halves = line.splitn(2, ';');
        let vertex_part = halves.next().unwrap_or("").trim();
        let edge_part = halves.next().unwrap_or("").trim();
        if vertex_part.is_empty() {
            return Err(Error::EmptySpec);
        }
        let mut names: Vec<String> = Vec::new();
        let mut vertices = Vec::new();
        for token in vertex_part.split(',') {
            let token = token.trim();
            let (deg_text, name) = token.split_once(':').ok_or_else(|| {
                Error::GraphSpec(format!("vertex `{token}` is not of the form deg:poly"))
            })?;
            let degree: usize = deg_text.trim().parse().map_err(|_| {
                Error::GraphSpec(format!("invalid vertex degree `{deg_text}`"))
            })?;
            let name = name.trim().to_string();
            if name.is_empty() {
                return Err(Error::GraphSpec(format!(
                    "vertex `{token}` has an empty polynomial name"
                )));
            }
            let poly = match names.iter().position(|n| *n == name) {
                Some(i) => i,
                None => {
                    names.push(name);
                    names.len() - 1
                }
            };
            vertices.push(PartRef { poly, degree });
        }
        let mut edges = Vec::new();
        if !edge_part.is_empty() {
            for token in edge_part.split(',') {
                let token = token.trim();
                let (a, b) = token.split_once('-').ok_or_else(|| {
                    Error::GraphSpec(format!("edge `{token}` is not of the form i-j"))
                })?;
                let a: usize = a.trim().parse().map_err(|_| {
                    Error::GraphSpec(format!("invalid edge endpoint in `{token}`"))
                })?;
                let b: usize = b.trim().parse().map_err(|_| {
                    Error::GraphSpec(format!("invalid edge endpoint in `{token}`"))
                })?;
                edges.push((a, b));
            }
        }
        Self::new(vertices, edges)
    }
}

fn slot_name(i: usize) -> String {
    const NAMES: &[u8] = b"pqrstuvwxyz";
    if i < NAMES.len() {
        (NAMES[i] as char).to_string()
    } else {
        format!("poly{i}")
    }
}

/// Recurse over all products of within-group assignments, filling
/// `perm[original] = canonical position`.
fn search_assignments(
    groups: &[(usize, usize)],
    group_idx: usize,
    order: &[usize],
    perm: &mut Vec<usize>,
    visit: &mut impl FnMut(&[usize]),
) {
    if group_idx == groups.len() {
        visit(perm);
        return;
    }
    let (start, end) = groups[group_idx];
    let members: Vec<usize> = order[start..end].to_vec();
    let mut positions: Vec<usize> = (start..end).collect();
    permute_assign(&members, &mut positions, 0, perm, &mut |perm| {
        search_assignments(groups, group_idx + 1, order, perm, visit);
    });
}

fn permute_assign(
    members: &[usize],
    positions: &mut Vec<usize>,
    at: usize,
    perm: &mut Vec<usize>,
    next: &mut impl FnMut(&mut Vec<usize>),
) {
    if at == members.len() {
        next(perm);
        return;
    }
    for i in at..positions.len() {
        positions.swap(at, i);
        perm[members[at]] = positions[at];
        permute_assign(members, positions, at + 1, perm, next);
        positions.swap(at, i);
    }
}

/// Canonical identity of a diagram: sorted vertex labels plus the
/// lexicographically minimal edge multiset over admissible relabelings.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CanonicalForm {
    labels: Vec<(usize, usize)>, // (degree, poly), sorted
    edges: Vec<(usize, usize)>,
}

impl CanonicalForm {
    pub fn labels(&self) -> &[(usize, usize)] {
        &self.labels
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Rebuild a concrete graph in canonical vertex order.
    pub fn to_graph(&self) -> ContractionGraph {
        let vertices = self
            .labels
            .iter()
            .map(|&(degree, poly)| PartRef { poly, degree })
            .collect();
        ContractionGraph::new(vertices, self.edges.clone())
            .expect("canonical form stores a valid graph")
    }
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

/// Dense tensor with one named axis per open edge slot.
struct AxisTensor {
    n: usize,
    axes: Vec<usize>,
    data: Vec<f64>,
}

fn decode(mut flat: usize, n: usize, digits: &mut [usize]) {
    for pos in (0..digits.len()).rev() {
        digits[pos] = flat % n;
        flat /= n;
    }
}

fn encode(digits: &[usize], n: usize) -> usize {
    digits.iter().fold(0, |acc, &d| acc * n + d)
}

/// Contract every repeated axis pair within one tensor (self-loops).
fn self_trace(mut t: AxisTensor) -> AxisTensor {
    loop {
        let dup = (0..t.axes.len()).find_map(|i| {
            ((i + 1)..t.axes.len())
                .find(|&j| t.axes[j] == t.axes[i])
                .map(|j| (i, j))
        });
        let Some((i, j)) = dup else {
            return t;
        };
        let n = t.n;
        let k = t.axes.len();
        let keep: Vec<usize> = (0..k).filter(|&m| m != i && m != j).collect();
        let out_axes: Vec<usize> = keep.iter().map(|&m| t.axes[m]).collect();
        let mut out = vec![0.0; n.pow(out_axes.len() as u32)];
        let mut out_digits = vec![0usize; out_axes.len()];
        let mut in_digits = vec![0usize; k];
        for (flat, slot) in out.iter_mut().enumerate() {
            decode(flat, n, &mut out_digits);
            for (pos, &m) in keep.iter().enumerate() {
                in_digits[m] = out_digits[pos];
            }
            let mut acc = 0.0;
            for a in 0..n {
                in_digits[i] = a;
                in_digits[j] = a;
                acc += t.data[encode(&in_digits, n)];
            }
            *slot = acc;
        }
        t = AxisTensor {
            n,
            axes: out_axes,
            data: out,
        };
    }
}

enum Source {
    Free(usize),
    Shared(usize),
}

/// Contract two tensors over all axes they share.
fn contract_pair(a: &AxisTensor, b: &AxisTensor) -> AxisTensor {
    let n = a.n;
    let shared: Vec<usize> = a
        .axes
        .iter()
        .filter(|ax| b.axes.contains(ax))
        .copied()
        .collect();
    let mut out_axes = Vec::new();
    let mut map_sources = |axes: &[usize], start: usize| -> Vec<Source> {
        let mut free_at = start;
        axes.iter()
            .map(|ax| match shared.iter().position(|s| s == ax) {
                Some(i) => Source::Shared(i),
                None => {
                    out_axes.push(*ax);
                    let src = Source::Free(free_at);
                    free_at += 1;
                    src
                }
            })
            .collect()
    };
    let a_src = map_sources(&a.axes, 0);
    let b_src = map_sources(&b.axes, a.axes.len() - shared.len());

    let out_rank = out_axes.len();
    let mut out = vec![0.0; n.pow(out_rank as u32)];
    let mut out_digits = vec![0usize; out_rank];
    let mut shared_digits = vec![0usize; shared.len()];
    let mut a_digits = vec![0usize; a.axes.len()];
    let mut b_digits = vec![0usize; b.axes.len()];
    let shared_total = n.pow(shared.len() as u32);

    for (flat, slot) in out.iter_mut().enumerate() {
        decode(flat, n, &mut out_digits);
        let mut acc = 0.0;
        for sflat in 0..shared_total {
            decode(sflat, n, &mut shared_digits);
            fill_digits(&a_src, &out_digits, &shared_digits, &mut a_digits);
            fill_digits(&b_src, &out_digits, &shared_digits, &mut b_digits);
            acc += a.data[encode(&a_digits, n)] * b.data[encode(&b_digits, n)];
        }
        *slot = acc;
    }
    AxisTensor {
        n,
        axes: out_axes,
        data: out,
    }
}

fn fill_digits(src: &[Source], out_digits: &[usize], shared_digits: &[usize], digits: &mut [usize]) {
    for (pos, s) in src.iter().enumerate() {
        digits[pos] = match s {
            Source::Free(i) => out_digits[*i],
            Source::Shared(i) => shared_digits[*i],
        };
    }
}

/// Evaluate a contraction graph on the referenced polynomials.
///
/// Edges are contracted pairwise, eliminating the smallest intermediate
/// tensor first; disconnected graphs evaluate to the product of their
/// components. A vertex whose part is absent or all-zero short-circuits
/// the whole value to zero.
pub fn evaluate_graph(graph: &ContractionGraph, polys: &[&Polynomial]) -> Result<f64> {
    let Some(first) = polys.first() else {
        return Err(Error::MissingPolynomial {
            slot: 0,
            available: 0,
        });
    };
    let n = first.dimension();
    for p in polys {
        if p.dimension() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: p.dimension(),
            });
        }
    }

    let mut tensors: Vec<AxisTensor> = Vec::with_capacity(graph.vertices().len());
    for (v_idx, vref) in graph.vertices().iter().enumerate() {
        let poly = polys.get(vref.poly).ok_or(Error::MissingPolynomial {
            slot: vref.poly,
            available: polys.len(),
        })?;
        // Degrees above the polynomial's maximum are all-zero parts.
        let Some(part) = poly.part(vref.degree) else {
            return Ok(0.0);
        };
        if part.is_zero() {
            return Ok(0.0);
        }
        check_dense_size(n, vref.degree)?;
        let mut axes = Vec::with_capacity(vref.degree);
        for (e_idx, &(a, b)) in graph.edges().iter().enumerate() {
            if a == v_idx {
                axes.push(e_idx);
            }
            if b == v_idx {
                axes.push(e_idx);
            }
        }
        tensors.push(self_trace(AxisTensor {
            n,
            axes,
            data: part.dense(),
        }));
    }

    loop {
        let mut best: Option<(usize, usize, usize)> = None; // (i, j, result rank)
        for i in 0..tensors.len() {
            for j in (i + 1)..tensors.len() {
                let shared = tensors[i]
                    .axes
                    .iter()
                    .filter(|ax| tensors[j].axes.contains(ax))
                    .count();
                if shared == 0 {
                    continue;
                }
                let rank = tensors[i].axes.len() + tensors[j].axes.len() - 2 * shared;
                if best.is_none_or(|(_, _, r)| rank < r) {
                    best = Some((i, j, rank));
                }
            }
        }
        let Some((i, j, rank)) = best else {
            break;
        };
        check_dense_size(n, rank)?;
        let b = tensors.remove(j);
        let a = std::mem::replace(
            &mut tensors[i],
            AxisTensor {
                n,
                axes: Vec::new(),
                data: vec![0.0],
            },
        );
        tensors[i] = contract_pair(&a, &b);
    }

    debug_assert!(tensors.iter().all(|t| t.axes.is_empty()));
    Ok(tensors.iter().map(|t| t.data[0]).product())
}

fn check_dense_size(n: usize, rank: usize) -> Result<()> {
    let elements = (n as u128)
        .checked_pow(rank as u32)
        .unwrap_or(u128::MAX);
    if elements > DENSE_TENSOR_CAP {
        return Err(Error::ContractionTooLarge {
            elements,
            limit: DENSE_TENSOR_CAP,
        });
    }
    Ok(())
}

/// Evaluate a batch of graphs; parallel over graphs when the `parallel`
/// feature is enabled, with per-graph results independent of thread count.
pub fn evaluate_graphs(graphs: &[ContractionGraph], polys: &[&Polynomial]) -> Result<Vec<f64>> {
    #[cfg(feature = "parallel")]
    {
        graphs
            .par_iter()
            .map(|g| evaluate_graph(g, polys))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        evaluate_graphs_seq(graphs, polys)
    }
}

/// Always-sequential batch evaluation (the fallback path; also the baseline
/// the benchmarks compare against).
pub fn evaluate_graphs_seq(graphs: &[ContractionGraph], polys: &[&Polynomial]) -> Result<Vec<f64>> {
    graphs.iter().map(|g| evaluate_graph(g, polys)).collect()
}

/// `Tr([p]^m)`; equals the `m`-cycle of degree-2 vertices by construction.
pub fn trace_power(p: &Polynomial, m: usize) -> f64 {
    assert!(m >= 1, "trace power requires m >= 1");
    let base = p.quadratic_matrix();
    let mut acc = base.clone();
    for _ in 1..m {
        acc *= &base;
    }
    acc.trace()
}

/// Enumerate all connected, fully contracted multigraphs whose vertex
/// multiset is exactly `spec`, deduplicated up to isomorphism and returned
/// in sorted canonical order.
pub fn enumerate_graphs(spec: &[(usize, usize)], max_vertices: usize) -> Result<Vec<ContractionGraph>> {
    if spec.is_empty() {
        return Err(Error::EmptySpec);
    }
    let cap = max_vertices.min(CANONICAL_VERTEX_CAP);
    if spec.len() > cap {
        return Err(Error::TooManyVertices {
            vertices: spec.len(),
            limit: cap,
        });
    }
    if spec.iter().any(|&(degree, _)| degree == 0) {
        return Err(Error::GraphSpec(
            "enumeration requires every vertex degree to be at least 1".into(),
        ));
    }
    let slots: usize = spec.iter().map(|&(degree, _)| degree).sum();
    if slots > ENUMERATION_SLOT_CAP {
        return Err(Error::TooManySlots {
            slots,
            limit: ENUMERATION_SLOT_CAP,
        });
    }
    if !slots.is_multiple_of(2) {
        return Err(Error::OddSlotCount { slots });
    }

    let mut sorted: Vec<(usize, usize)> = spec.to_vec();
    sorted.sort_unstable();
    let vertices: Vec<PartRef> = sorted
        .iter()
        .map(|&(degree, poly)| PartRef { poly, degree })
        .collect();

    let v = vertices.len();
    let mut residual: Vec<usize> = vertices.iter().map(|p| p.degree).collect();
    let mut multiplicity = vec![vec![0usize; v]; v];
    let mut forms: BTreeSet<CanonicalForm> = BTreeSet::new();

    distribute_vertex(0, &vertices, &mut residual, &mut multiplicity, &mut forms)?;

    Ok(forms.into_iter().map(|f| f.to_graph()).collect())
}

/// Backtrack over symmetric edge-multiplicity matrices with the vertex
/// degrees as row sums (diagonal entries count twice).
fn distribute_vertex(
    u: usize,
    vertices: &[PartRef],
    residual: &mut Vec<usize>,
    multiplicity: &mut Vec<Vec<usize>>,
    forms: &mut BTreeSet<CanonicalForm>,
) -> Result<()> {
    let v = vertices.len();
    if u == v {
        let mut edges = Vec::new();
        for (a, row) in multiplicity.iter().enumerate() {
            for (b, &count) in row.iter().enumerate().skip(a) {
                for _ in 0..count {
                    edges.push((a, b));
                }
            }
        }
        let graph = ContractionGraph::new(vertices.to_vec(), edges)?;
        if graph.is_connected() {
            forms.insert(graph.canonicalize()?);
        }
        return Ok(());
    }
    let rem = residual[u];
    // Self-loops consume two slots, so they only fit on degree >= 2 residue.
    for loops in 0..=(rem / 2) {
        multiplicity[u][u] = loops;
        distribute_partners(u, u + 1, rem - 2 * loops, vertices, residual, multiplicity, forms)?;
    }
    multiplicity[u][u] = 0;
    Ok(())
}

fn distribute_partners(
    u: usize,
    partner: usize,
    rem: usize,
    vertices: &[PartRef],
    residual: &mut Vec<usize>,
    multiplicity: &mut Vec<Vec<usize>>,
    forms: &mut BTreeSet<CanonicalForm>,
) -> Result<()> {
    let v = vertices.len();
    if partner == v {
        if rem == 0 {
            let saved = residual[u];
            residual[u] = 0;
            distribute_vertex(u + 1, vertices, residual, multiplicity, forms)?;
            residual[u] = saved;
        }
        return Ok(());
    }
    for count in 0..=rem.min(residual[partner]) {
        multiplicity[u][partner] = count;
        residual[partner] -= count;
        distribute_partners(u, partner + 1, rem - count, vertices, residual, multiplicity, forms)?;
        residual[partner] += count;
    }
    multiplicity[u][partner] = 0;
    Ok(())
}

/// Parse a multi-line graph-spec file; `#` starts a comment line.
pub fn parse_graph_spec_file(text: &str) -> Result<Vec<ContractionGraph>> {
    let mut graphs = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let graph = ContractionGraph::parse(line).map_err(|e| Error::Parse {
            line: idx + 1,
            message: e.to_string(),
        })?;
        graphs.push(graph);
    }
    Ok(graphs)
}
