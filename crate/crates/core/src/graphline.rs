//! Centerline graphs and polylines: spanning-tree reconstruction from
//! skeleton points, control-point abstraction, template interpolation,
//! unpooling and resampling.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{GridFrame, Point, Space};
use crate::nn::PointIndex;

/// Above this many points the MST is built on a k-nearest-neighbour graph.
pub const DENSE_MST_LIMIT: usize = 512;
const KNN: usize = 12;

/// Template size used when nothing else is configured.
pub const DEFAULT_TEMPLATE_POINTS: usize = 100;
pub const DEFAULT_CONTROL_POINTS: usize = 4;

/// Undirected graph of continuous centerline points.
#[derive(Clone, Debug, PartialEq)]
pub struct CenterlineGraph {
    space: Space,
    vertices: Vec<Point>,
    edges: Vec<[usize; 2]>,
    pub label: Option<String>,
}

impl CenterlineGraph {
    pub fn new(space: Space, vertices: Vec<Point>, edges: Vec<[usize; 2]>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for &[a, b] in &edges {
            if a >= vertices.len() || b >= vertices.len() {
                return Err(Error::InvalidArgument(format!(
                    "edge ({a},{b}) out of range"
                )));
            }
            if a == b {
                return Err(Error::InvalidArgument(format!("self-loop at {a}")));
            }
            if !seen.insert((a.min(b), a.max(b))) {
                return Err(Error::InvalidArgument(format!("duplicate edge ({a},{b})")));
            }
        }
        Ok(CenterlineGraph {
            space,
            vertices,
            edges,
            label: None,
        })
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn total_length(&self) -> f64 {
        self.edges
            .iter()
            .map(|&[a, b]| (self.vertices[a] - self.vertices[b]).norm())
            .sum()
    }

    fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.vertices.len()];
        for &[a, b] in &self.edges {
            let w = (self.vertices[a] - self.vertices[b]).norm();
            adj[a].push((b, w));
            adj[b].push((a, w));
        }
        for list in &mut adj {
            list.sort_by_key(|&(n, _)| n);
        }
        adj
    }

    pub fn degree(&self) -> Vec<usize> {
        let mut d = vec![0; self.vertices.len()];
        for &[a, b] in &self.edges {
            d[a] += 1;
            d[b] += 1;
        }
        d
    }

    pub fn is_connected(&self) -> bool {
        if self.vertices.is_empty() {
            return true;
        }
        let adj = self.adjacency();
        let mut seen = vec![false; self.vertices.len()];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &(n, _) in &adj[v] {
                if !seen[n] {
                    seen[n] = true;
                    stack.push(n);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// The longest geodesic path, found by a double Dijkstra sweep. Exact
    /// on trees.
    pub fn longest_path(&self) -> Result<Vec<usize>> {
        if self.vertices.is_empty() {
            return Err(Error::Empty("graph"));
        }
        if !self.is_connected() {
            return Err(Error::Disconnected);
        }
        let adj = self.adjacency();
        let (d0, _) = dijkstra(&adj, 0);
        let a = argmax(&d0);
        let (da, prev) = dijkstra(&adj, a);
        let b = argmax(&da);
        let mut path = vec![b];
        let mut cur = b;
        while cur != a {
            cur = prev[cur];
            path.push(cur);
        }
        // Canonical orientation: start at the lower-indexed endpoint.
        if path[0] > path[path.len() - 1] {
            path.reverse();
        }
        Ok(path)
    }
}

fn argmax(d: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in d.iter().enumerate() {
        if v > d[best] {
            best = i;
        }
    }
    best
}

#[derive(PartialEq)]
struct HeapItem(f64, usize);

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .total_cmp(&self.0)
            .then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn dijkstra(adj: &[Vec<(usize, f64)>], src: usize) -> (Vec<f64>, Vec<usize>) {
    let mut dist = vec![f64::INFINITY; adj.len()];
    let mut prev = vec![usize::MAX; adj.len()];
    let mut heap = BinaryHeap::new();
    dist[src] = 0.0;
    heap.push(HeapItem(0.0, src));
    while let Some(HeapItem(d, v)) = heap.pop() {
        if d > dist[v] {
            continue;
        }
        for &(n, w) in &adj[v] {
            let nd = d + w;
            if nd < dist[n] {
                dist[n] = nd;
                prev[n] = v;
                heap.push(HeapItem(nd, n));
            }
        }
    }
    for d in &mut dist {
        if d.is_infinite() {
            *d = -1.0;
        }
    }
    (dist, prev)
}

/// Ordered chain of points, `v_i` connected to `v_{i+1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Polyline {
    space: Space,
    points: Vec<Point>,
}

impl Polyline {
    /// At least two points, no two consecutive points equal.
    pub fn new(space: Space, points: Vec<Point>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Degenerate("polyline needs at least two points"));
        }
        if points.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Degenerate("consecutive polyline points coincide"));
        }
        Ok(Polyline { space, points })
    }

    /// Wraps deformation output, where coincident neighbours are possible.
    pub(crate) fn from_raw(space: Space, points: Vec<Point>) -> Self {
        debug_assert!(points.len() >= 2);
        Polyline { space, points }
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn into_points(self) -> Vec<Point> {
        self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn length(&self) -> f64 {
        self.points.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
    }

    pub fn to_space(&self, frame: &GridFrame, space: Space) -> Polyline {
        Polyline {
            space,
            points: frame.convert_all(&self.points, self.space, space),
        }
    }

    pub fn to_graph(&self) -> CenterlineGraph {
        CenterlineGraph {
            space: self.space,
            vertices: self.points.clone(),
            edges: (1..self.points.len()).map(|i| [i - 1, i]).collect(),
            label: None,
        }
    }

    /// Point at arc length `s` from the start (clamped).
    pub fn point_at_arclength(&self, s: f64) -> Point {
        let mut acc = 0.0;
        for w in self.points.windows(2) {
            let len = (w[1] - w[0]).norm();
            if acc + len >= s && len > 0.0 {
                let t = ((s - acc) / len).clamp(0.0, 1.0);
                return w[0] + (w[1] - w[0]) * t;
            }
            acc += len;
        }
        *self.points.last().unwrap()
    }

    pub fn to_cloud(&self) -> crate::geom::PointCloud {
        crate::geom::PointCloud::new(self.space, self.points.clone())
    }

    /// Distance from `p` to the nearest point on the polyline.
    pub fn distance_to(&self, p: &Point) -> f64 {
        self.points
            .windows(2)
            .map(|w| crate::geom::point_segment_distance(p, &w[0], &w[1]).0)
            .fold(f64::INFINITY, f64::min)
    }
}

/// `k` points at equal arc-length fractions of a graph's longest path.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlPoints {
    pub space: Space,
    pub points: Vec<Point>,
}

struct Dsu(Vec<usize>);

impl Dsu {
    fn new(n: usize) -> Self {
        Dsu((0..n).collect())
    }
    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut c = x;
        while self.0[c] != r {
            let n = self.0[c];
            self.0[c] = r;
            c = n;
        }
        r
    }
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        let (lo, hi) = (ra.min(rb), ra.max(rb));
        self.0[hi] = lo;
        true
    }
}

fn prim_dense(points: &[Point]) -> Vec<[usize; 2]> {
    let n = points.len();
    let mut in_tree = vec![false; n];
    let mut key = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut edges = Vec::with_capacity(n - 1);
    key[0] = 0.0;
    for _ in 0..n {
        let mut u = usize::MAX;
        for v in 0..n {
            if !in_tree[v] && (u == usize::MAX || key[v] < key[u]) {
                u = v;
            }
        }
        in_tree[u] = true;
        if parent[u] != usize::MAX {
            edges.push([parent[u].min(u), parent[u].max(u)]);
        }
        for v in 0..n {
            if !in_tree[v] {
                let d = (points[u] - points[v]).norm();
                if d < key[v] {
                    key[v] = d;
                    parent[v] = u;
                }
            }
        }
    }
    edges
}

fn kruskal_sparse(points: &[Point]) -> Vec<[usize; 2]> {
    let n = points.len();
    let index = PointIndex::new(points).expect("nonempty");
    let mut cand: Vec<(f64, usize, usize)> = Vec::with_capacity(n * KNN);
    for (i, p) in points.iter().enumerate() {
        for (d, j) in index.nearest_k(p, KNN + 1) {
            if j != i {
                cand.push((d, i.min(j), i.max(j)));
            }
        }
    }
    cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    cand.dedup_by(|a, b| a.1 == b.1 && a.2 == b.2);
    let mut dsu = Dsu::new(n);
    let mut edges = Vec::with_capacity(n - 1);
    for &(_, a, b) in &cand {
        if dsu.union(a, b) {
            edges.push([a, b]);
        }
    }
    // Connectivity repair: repeatedly add each component's shortest
    // outgoing edge until one component remains.
    while edges.len() < n - 1 {
        let roots: Vec<usize> = (0..n).map(|i| dsu.find(i)).collect();
        let mut best: std::collections::BTreeMap<usize, (f64, usize, usize)> = Default::default();
        for i in 0..n {
            for j in (i + 1)..n {
                if roots[i] == roots[j] {
                    continue;
                }
                let d = (points[i] - points[j]).norm();
                for r in [roots[i], roots[j]] {
                    let e = best.entry(r).or_insert((f64::INFINITY, 0, 0));
                    if d < e.0 {
                        *e = (d, i, j);
                    }
                }
            }
        }
        let mut bridges: Vec<(f64, usize, usize)> = best.into_values().collect();
        bridges.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        for (_, a, b) in bridges {
            if dsu.union(a, b) {
                edges.push([a, b]);
            }
        }
    }
    edges
}

/// Minimum spanning tree over the given points (Euclidean weights).
pub fn mst_reconstruct(space: Space, points: &[Point]) -> Result<CenterlineGraph> {
    if points.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "spanning tree needs at least 2 points, got {}",
            points.len()
        )));
    }
    let mut edges = if points.len() <= DENSE_MST_LIMIT {
        prim_dense(points)
    } else {
        kruskal_sparse(points)
    };
    edges.sort_unstable();
    CenterlineGraph::new(space, points.to_vec(), edges)
}

/// Cumulative arc length along a point sequence.
fn cumulative(points: &[Point]) -> Vec<f64> {
    let mut acc = vec![0.0; points.len()];
    for i in 1..points.len() {
        acc[i] = acc[i - 1] + (points[i] - points[i - 1]).norm();
    }
    acc
}

/// `k` points at arc-length fractions `0, 1/(k-1), ..., 1` along the
/// longest path of `g`.
pub fn select_control_points(g: &CenterlineGraph, k: usize) -> Result<ControlPoints> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!(
            "need k >= 2 control points, got {k}"
        )));
    }
    let path: Vec<Point> = g
        .longest_path()?
        .into_iter()
        .map(|i| g.vertices[i])
        .collect();
    if path.len() < 2 {
        return Err(Error::Degenerate("longest path has a single vertex"));
    }
    let acc = cumulative(&path);
    let total = *acc.last().unwrap();
    if total <= 0.0 {
        return Err(Error::Degenerate("longest path has zero length"));
    }
    let line = Polyline::from_raw(g.space, path);
    let points = (0..k)
        .map(|i| {
            if i == k - 1 {
                *line.points.last().unwrap()
            } else {
                line.point_at_arclength(total * i as f64 / (k - 1) as f64)
            }
        })
        .collect();
    Ok(ControlPoints {
        space: g.space,
        points,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    #[default]
    Linear,
    Bspline2,
    Bspline3,
}

impl Interpolation {
    pub fn as_str(self) -> &'static str {
        match self {
            Interpolation::Linear => "linear",
            Interpolation::Bspline2 => "bspline2",
            Interpolation::Bspline3 => "bspline3",
        }
    }

    fn degree(self) -> usize {
        match self {
            Interpolation::Linear => 1,
            Interpolation::Bspline2 => 2,
            Interpolation::Bspline3 => 3,
        }
    }
}

impl FromStr for Interpolation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Interpolation::Linear),
            "bspline2" => Ok(Interpolation::Bspline2),
            "bspline3" => Ok(Interpolation::Bspline3),
            other => Err(Error::UnknownMethod(other.to_string())),
        }
    }
}

/// Clamped B-spline curve of degree `p`.
struct BSpline {
    degree: usize,
    knots: Vec<f64>,
    ctrl: Vec<Point>,
}

impl BSpline {
    fn span(&self, u: f64) -> usize {
        let n = self.ctrl.len() - 1;
        if u >= self.knots[n + 1] {
            return n;
        }
        let mut lo = self.degree;
        let mut hi = n + 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if u < self.knots[mid] {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        lo
    }

    /// Non-vanishing basis functions `N_{span-p..=span, p}(u)`.
    fn basis(&self, span: usize, u: f64) -> Vec<f64> {
        let p = self.degree;
        let mut n = vec![0.0; p + 1];
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        n[0] = 1.0;
        for j in 1..=p {
            left[j] = u - self.knots[span + 1 - j];
            right[j] = self.knots[span + j] - u;
            let mut saved = 0.0;
            for r in 0..j {
                let tmp = n[r] / (right[r + 1] + left[j - r]);
                n[r] = saved + right[r + 1] * tmp;
                saved = left[j - r] * tmp;
            }
            n[j] = saved;
        }
        n
    }

    fn eval(&self, u: f64) -> Point {
        let span = self.span(u);
        let b = self.basis(span, u);
        let mut acc = nalgebra::Vector3::zeros();
        for (i, w) in b.iter().enumerate() {
            acc += self.ctrl[span - self.degree + i].coords * *w;
        }
        Point::from(acc)
    }

    /// Global interpolation through `data` at parameters `j/(k-1)`, knots by
    /// averaging.
    fn interpolate(data: &[Point], degree: usize) -> Result<Self> {
        let k = data.len();
        let p = degree.min(k - 1);
        let params: Vec<f64> = (0..k).map(|j| j as f64 / (k - 1) as f64).collect();
        let mut knots = vec![0.0; k + p + 1];
        for kn in knots.iter_mut().skip(k) {
            *kn = 1.0;
        }
        for j in 1..k - p {
            knots[j + p] = params[j..j + p].iter().sum::<f64>() / p as f64;
        }
        let mut spline = BSpline {
            degree: p,
            knots,
            ctrl: data.to_vec(),
        };
        let mut a = DMatrix::<f64>::zeros(k, k);
        for (row, &u) in params.iter().enumerate() {
            let span = spline.span(u);
            for (i, w) in spline.basis(span, u).into_iter().enumerate() {
                a[(row, span - p + i)] = w;
            }
        }
        let lu = a.lu();
        let mut ctrl = vec![Point::origin(); k];
        for axis in 0..3 {
            let rhs = DVector::from_iterator(k, data.iter().map(|q| q[axis]));
            let sol = lu
                .solve(&rhs)
                .ok_or(Error::Degenerate("singular spline interpolation system"))?;
            for (c, v) in ctrl.iter_mut().zip(sol.iter()) {
                c[axis] = *v;
            }
        }
        spline.ctrl = ctrl;
        Ok(spline)
    }
}

/// Samples `n` points at equal parameter steps on the interpolant through
/// the control points. Both ends pass through the first/last control point.
pub fn interpolate_template(
    cp: &ControlPoints,
    method: Interpolation,
    n: usize,
) -> Result<Polyline> {
    let k = cp.points.len();
    if k < 2 {
        return Err(Error::InvalidArgument(
            "need at least 2 control points".into(),
        ));
    }
    if n < k {
        return Err(Error::InvalidArgument(format!(
            "template size {n} < control points {k}"
        )));
    }
    let points: Vec<Point> = match method {
        Interpolation::Linear => (0..n)
            .map(|i| {
                // Integer split of i*(k-1)/(n-1) so control parameters land exactly.
                let num = i * (k - 1);
                let (seg, rem) = (num / (n - 1), num % (n - 1));
                if rem == 0 {
                    cp.points[seg]
                } else {
                    let f = rem as f64 / (n - 1) as f64;
                    cp.points[seg] + (cp.points[seg + 1] - cp.points[seg]) * f
                }
            })
            .collect(),
        _ => {
            let spline = BSpline::interpolate(&cp.points, method.degree())?;
            (0..n)
                .map(|i| match i {
                    0 => cp.points[0],
                    _ if i == n - 1 => cp.points[k - 1],
                    _ => spline.eval(i as f64 / (n - 1) as f64),
                })
                .collect()
        }
    };
    Polyline::new(cp.space, points)
}

/// Inserts the midpoint between every pair of consecutive points.
pub fn unpool(p: &Polyline) -> Polyline {
    let mut out = Vec::with_capacity(2 * p.points.len() - 1);
    for w in p.points.windows(2) {
        out.push(w[0]);
        out.push(Point::from((w[0].coords + w[1].coords) * 0.5));
    }
    out.push(*p.points.last().unwrap());
    Polyline {
        space: p.space,
        points: out,
    }
}

/// Walks the polyline emitting points at Euclidean distance `spacing` from
/// their predecessor, then the final endpoint.
pub fn resample_arclength(p: &Polyline, spacing: f64) -> Result<Polyline> {
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "spacing must be positive, got {spacing}"
        )));
    }
    if p.length() <= 0.0 {
        return Err(Error::Degenerate("zero-length polyline"));
    }
    let pts = &p.points;
    let end = *pts.last().unwrap();
    let mut out = vec![pts[0]];
    let mut cur = pts[0];
    let mut seg = 0;
    let mut from = pts[0];
    let s2 = spacing * spacing;
    while seg + 1 < pts.len() {
        let b = pts[seg + 1];
        if (b - cur).norm_squared() < s2 {
            seg += 1;
            from = b;
            continue;
        }
        // Solve |from + t (b - from) - cur| = spacing for the root in (0, 1].
        let d = b - from;
        let f = from - cur;
        let a2 = d.norm_squared();
        let b1 = 2.0 * f.dot(&d);
        let c0 = f.norm_squared() - s2;
        let disc = (b1 * b1 - 4.0 * a2 * c0).max(0.0);
        let t = ((-b1 + disc.sqrt()) / (2.0 * a2)).clamp(0.0, 1.0);
        let x = from + d * t;
        out.push(x);
        cur = x;
        from = x;
    }
    if (end - cur).norm() > 1e-9 * spacing {
        out.push(end);
    } else {
        *out.last_mut().unwrap() = end;
    }
    Polyline::new(p.space, out)
}

/// Splits a graph into branch paths between endpoints and junctions
/// (vertices of degree other than two).
pub fn split_branches(g: &CenterlineGraph) -> Result<Vec<Polyline>> {
    let adj = g.adjacency();
    let deg = g.degree();
    let n = g.vertices.len();
    let mut used = std::collections::HashSet::new();
    let mut branches = Vec::new();
    let key = |a: usize, b: usize| (a.min(b), a.max(b));
    let walk = |start: usize, next: usize, used: &mut std::collections::HashSet<(usize, usize)>| {
        let mut path = vec![start];
        let (mut prev, mut cur) = (start, next);
        used.insert(key(prev, cur));
        loop {
            path.push(cur);
            if deg[cur] != 2 || cur == start {
                break;
            }
            let nxt = adj[cur]
                .iter()
                .map(|e| e.0)
                .find(|&x| x != prev && !used.contains(&key(cur, x)));
            match nxt {
                Some(x) => {
                    used.insert(key(cur, x));
                    prev = cur;
                    cur = x;
                }
                None => break,
            }
        }
        path
    };
    for v in 0..n {
        if deg[v] == 2 {
            continue;
        }
        for &(nb, _) in &adj[v] {
            if !used.contains(&key(v, nb)) {
                branches.push(walk(v, nb, &mut used));
            }
        }
    }
    // Pure cycles have no endpoint or junction.
    for v in 0..n {
        for &(nb, _) in &adj[v] {
            if !used.contains(&key(v, nb)) {
                branches.push(walk(v, nb, &mut used));
            }
        }
    }
    branches
        .into_iter()
        .map(|idx| Polyline::new(g.space, idx.into_iter().map(|i| g.vertices[i]).collect()))
        .collect()
}

/// On-disk centerline: `{"space", "nodes", "edges", "label"}`. Chains omit
/// `edges`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct CenterlineFile {
    pub space: Space,
    pub nodes: Vec<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<[usize; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl CenterlineFile {
    pub fn from_polyline(p: &Polyline, label: Option<&str>) -> Self {
        CenterlineFile {
            space: p.space,
            nodes: p.points.iter().map(|q| [q.x, q.y, q.z]).collect(),
            edges: None,
            label: label.map(str::to_string),
        }
    }

    pub fn from_graph(g: &CenterlineGraph) -> Self {
        CenterlineFile {
            space: g.space,
            nodes: g.vertices.iter().map(|q| [q.x, q.y, q.z]).collect(),
            edges: Some(g.edges.clone()),
            label: g.label.clone(),
        }
    }

    fn points(&self) -> Vec<Point> {
        self.nodes
            .iter()
            .map(|n| Point::new(n[0], n[1], n[2]))
            .collect()
    }

    pub fn to_graph(&self) -> Result<CenterlineGraph> {
        let n = self.nodes.len();
        let edges = match &self.edges {
            Some(e) => e.clone(),
            None => (1..n).map(|i| [i - 1, i]).collect(),
        };
        let mut g = CenterlineGraph::new(self.space, self.points(), edges)?;
        g.label = self.label.clone();
        Ok(g)
    }

    /// Chain view. Explicit edges must form a simple path; their node order
    /// is recovered from the graph.
    pub fn to_polyline(&self) -> Result<Polyline> {
        match &self.edges {
            None => Polyline::new(self.space, self.points()),
            Some(_) => {
                let g = self.to_graph()?;
                if g.degree().iter().any(|&d| d > 2) || g.edges.len() + 1 != g.vertices.len() {
                    return Err(Error::InvalidArgument(
                        "centerline graph is not a simple chain; split branches first".into(),
                    ));
                }
                let path = g.longest_path()?;
                Polyline::new(
                    self.space,
                    path.into_iter().map(|i| g.vertices[i]).collect(),
                )
            }
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = serde_json::to_string(self).expect("centerline serializes");
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            source: e,
        })
    }
}
