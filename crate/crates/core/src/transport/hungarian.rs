//! Dense linear assignment, O(n^3): the row-by-row Hungarian method with
//! dual potentials, and a faster Jonker-Volgenant variant.

/// Minimizing permutation (`perm[row] = column`) and the dual potentials
/// `u`, `v` with `cost(i, j) - u[i] - v[j] >= 0`, tight on the permutation.
pub struct Solution {
    pub perm: Vec<usize>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

pub fn solve_hungarian(n: usize, cost: impl Fn(usize, usize) -> f64) -> Solution {
    if n == 0 {
        return Solution {
            perm: Vec::new(),
            u: Vec::new(),
            v: Vec::new(),
        };
    }
    let inf = f64::INFINITY;
    // 1-based with a virtual column 0.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![inf; n + 1];
    let mut used = vec![false; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        minv.iter_mut().for_each(|m| *m = inf);
        used.iter_mut().for_each(|x| *x = false);
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let ui0 = u[i0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - ui0 - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut perm = vec![0usize; n];
    for j in 1..=n {
        perm[p[j] - 1] = j - 1;
    }
    Solution {
        perm,
        u: u[1..].to_vec(),
        v: v[1..].to_vec(),
    }
}

const NONE: usize = usize::MAX;

/// Minimum-cost assignment of a row-major dense matrix.
///
/// Jonker-Volgenant initialisation (column reduction and reduction
/// transfer) followed by shortest augmenting paths. Augmenting row
/// reduction is left out: on exit-pair costs it is slower than the paths it
/// saves. Distances are kept absolute so that the column potentials move
/// once per augmentation, and the scans are branch-free: finished columns
/// carry an infinite penalty instead of a flag test.
pub fn solve(n: usize, cost: &[f64]) -> Solution {
    assert_eq!(cost.len(), n * n);
    if n < 2 {
        return solve_hungarian(n, |i, j| cost[i * n + j]);
    }
    let row = |i: usize| &cost[i * n..(i + 1) * n];
    let mut x = vec![NONE; n]; // row -> column
    let mut y = vec![NONE; n]; // column -> row
    let mut v = vec![f64::INFINITY; n];

    // column reduction
    for i in 0..n {
        for (j, &cij) in row(i).iter().enumerate() {
            if cij < v[j] {
                v[j] = cij;
                y[j] = i;
            }
        }
    }
    let mut unique = vec![true; n];
    for j in (0..n).rev() {
        let i = y[j];
        if x[i] == NONE {
            x[i] = j;
        } else {
            unique[i] = false;
            y[j] = NONE;
        }
    }
    // reduction transfer
    let mut free = Vec::with_capacity(n);
    for i in 0..n {
        if x[i] == NONE {
            free.push(i);
        } else if unique[i] {
            let j = x[i];
            let m = row(i)
                .iter()
                .zip(&v)
                .enumerate()
                .filter(|&(k, _)| k != j)
                .map(|(_, (c, vk))| c - vk)
                .fold(f64::INFINITY, f64::min);
            v[j] -= m;
        }
    }

    augment_dispatch(n, cost, &free, &mut x, &mut y, &mut v);

    let u = (0..n)
        .map(|i| {
            row(i)
                .iter()
                .zip(&v)
                .map(|(c, vj)| c - vj)
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    Solution { perm: x, u, v }
}

fn augment_dispatch(n: usize, cost: &[f64], free: &[usize], x: &mut [usize], y: &mut [usize], v: &mut [f64]) {
    #[cfg(target_arch = "x86_64")]
    if std::is_x86_feature_detected!("avx2") {
        // SAFETY: the feature was detected at run time.
        unsafe { augment_avx2(n, cost, free, x, y, v) };
        return;
    }
    augment(n, cost, free, x, y, v);
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn augment_avx2(n: usize, cost: &[f64], free: &[usize], x: &mut [usize], y: &mut [usize], v: &mut [f64]) {
    augment(n, cost, free, x, y, v);
}

/// One Dijkstra search per free row over reduced costs, then the
/// potential update and the path flip.
#[inline(always)]
fn augment(n: usize, cost: &[f64], free: &[usize], x: &mut [usize], y: &mut [usize], v: &mut [f64]) {
    let row = |i: usize| &cost[i * n..(i + 1) * n];
    let mut d = vec![0.0; n];
    let mut pen = vec![0.0; n];
    let mut pred = vec![0usize; n];
    let mut finished = Vec::new();
    for &s in free {
        for (dj, (c, vj)) in d.iter_mut().zip(row(s).iter().zip(v.iter())) {
            *dj = c - vj;
        }
        pred.fill(s);
        pen.fill(0.0);
        finished.clear();
        let mut delta = d.iter().fold(f64::INFINITY, |m, &t| if t < m { t } else { m });
        let (end, total) = loop {
            let j1 = (0..n).find(|&j| d[j] + pen[j] == delta).expect("a finite minimum");
            if y[j1] == NONE {
                break (j1, delta);
            }
            pen[j1] = f64::INFINITY;
            finished.push(j1);
            let i = y[j1];
            let r = row(i);
            let base = delta - (r[j1] - v[j1]);
            let mut next = f64::INFINITY;
            for ((((dj, pj), &c), &vj), &qj) in d.iter_mut().zip(pred.iter_mut()).zip(r).zip(v.iter()).zip(&pen) {
                let nd = base + c - vj + qj;
                let better = nd < *dj;
                *dj = if better { nd } else { *dj };
                *pj = if better { i } else { *pj };
                let t = *dj + qj;
                next = if t < next { t } else { next };
            }
            delta = next;
        };
        for &j in &finished {
            v[j] += d[j] - total;
        }
        let mut j = end;
        loop {
            let i = pred[j];
            y[j] = i;
            let prev = std::mem::replace(&mut x[i], j);
            if i == s {
                break;
            }
            j = prev;
        }
    }
}

/// Among optimal permutations, moves to the lexicographically smallest one
/// (by the sequence `perm[0], perm[1], ...`).
///
/// Works on the tight edges of the dual solution: row `i` is given the
/// smallest tight column `j` for which the rows after `i` can be rematched
/// along tight edges. A switch is kept only if it does not increase the
/// row-ordered floating point sum of the matched costs.
pub fn lexicographic_ties(sol: &mut Solution, cost: impl Fn(usize, usize) -> f64, tol: f64) {
    let n = sol.perm.len();
    if n < 2 {
        return;
    }
    let tight: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| cost(i, j) - sol.u[i] - sol.v[j] <= tol)
                .collect()
        })
        .collect();
    let mut owner = vec![0usize; n];
    for (i, &j) in sol.perm.iter().enumerate() {
        owner[j] = i;
    }
    let row_sum = |perm: &[usize]| perm.iter().enumerate().map(|(i, &j)| cost(i, j)).sum::<f64>();
    let mut current = row_sum(&sol.perm);
    let mut seen = vec![usize::MAX; n];
    let mut parent = vec![usize::MAX; n];
    let mut stamp = 0usize;
    for i in 0..n {
        for &j in &tight[i] {
            if j >= sol.perm[i] {
                break;
            }
            let r = owner[j];
            if r < i {
                continue;
            }
            // Alternating path: row r gives up column j and must reach the
            // column freed by row i, through rows after i.
            stamp += 1;
            let target = sol.perm[i];
            let mut queue = vec![r];
            let mut found = None;
            let mut head = 0;
            'bfs: while head < queue.len() {
                let row = queue[head];
                head += 1;
                for &c in &tight[row] {
                    if c == j || seen[c] == stamp {
                        continue;
                    }
                    seen[c] = stamp;
                    parent[c] = row;
                    if c == target {
                        found = Some(c);
                        break 'bfs;
                    }
                    let next = owner[c];
                    if next > i {
                        queue.push(next);
                    }
                }
            }
            let Some(mut c) = found else { continue };
            let mut candidate = sol.perm.clone();
            candidate[i] = j;
            loop {
                let row = parent[c];
                let prev = candidate[row];
                candidate[row] = c;
                if row == r {
                    break;
                }
                c = prev;
            }
            let s = row_sum(&candidate);
            if s <= current {
                current = s;
                sol.perm = candidate;
                for (row, &col) in sol.perm.iter().enumerate() {
                    owner[col] = row;
                }
                break;
            }
        }
    }
}
