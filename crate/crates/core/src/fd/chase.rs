use super::{closure_of, AttrSet, FdSet};

/// Tableau chase: the decomposition is lossless iff some row becomes fully
/// distinguished.
pub fn is_lossless(universe: &AttrSet, schemes: &[AttrSet], sigma: &FdSet) -> bool {
    let cols: Vec<&String> = universe.iter().collect();
    let n = cols.len();
    // Symbol 0 is the distinguished variable.
    let mut rows: Vec<Vec<usize>> = schemes
        .iter()
        .enumerate()
        .map(|(r, s)| cols.iter().enumerate().map(|(c, a)| if s.contains(*a) { 0 } else { 1 + r * n + c }).collect())
        .collect();
    let fds: Vec<(Vec<usize>, Vec<usize>)> = sigma
        .fds()
        .iter()
        .filter_map(|fd| {
            let idx = |s: &AttrSet| s.iter().map(|a| cols.iter().position(|c| *c == a)).collect::<Option<Vec<_>>>();
            Some((idx(&fd.lhs)?, idx(&fd.rhs)?))
        })
        .collect();

    loop {
        let mut changed = false;
        for (lhs, rhs) in &fds {
            for i in 0..rows.len() {
                for j in i + 1..rows.len() {
                    if lhs.iter().all(|&c| rows[i][c] == rows[j][c]) {
                        for &c in rhs {
                            let (a, b) = (rows[i][c], rows[j][c]);
                            if a != b {
                                let (keep, drop) = (a.min(b), a.max(b));
                                for row in rows.iter_mut() {
                                    if row[c] == drop {
                                        row[c] = keep;
                                    }
                                }
                                changed = true;
                            }
                        }
                    }
                }
            }
        }
        if rows.iter().any(|r| r.iter().all(|&s| s == 0)) {
            return true;
        }
        if !changed {
            return false;
        }
    }
}

/// Whether every FD of `sigma` is implied by the union of its projections
/// onto the schemes, computed without materialising the projections.
pub fn preserves_dependencies(schemes: &[AttrSet], sigma: &FdSet) -> bool {
    sigma.fds().iter().all(|fd| {
        let mut z = fd.lhs.clone();
        loop {
            let before = z.len();
            for s in schemes {
                let inside: AttrSet = z.intersection(s).cloned().collect();
                let reach = closure_of(sigma.fds(), &inside);
                z.extend(reach.intersection(s).cloned());
            }
            if z.len() == before {
                break;
            }
        }
        fd.rhs.is_subset(&z)
    })
}
