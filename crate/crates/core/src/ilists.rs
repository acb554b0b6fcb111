//! Interaction lists with close/far splits relative to target confinement
//! regions.
//!
//! Every list only contains boxes whose subtree holds at least one source.
//! List 1 and the List 3 variants are built for target boxes, List 2 and the
//! List 4 variants for target and target-ancestor boxes.

use std::io::{self, Write};

use crate::tree::{linf, Tree};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
pub enum ListKind {
    List1,
    List2,
    List3Close,
    List3Far,
    List4Close,
    List4Far,
}

impl ListKind {
    pub const ALL: [ListKind; 6] = [
        ListKind::List1,
        ListKind::List2,
        ListKind::List3Close,
        ListKind::List3Far,
        ListKind::List4Close,
        ListKind::List4Far,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ListKind::List1 => "list1",
            ListKind::List2 => "list2",
            ListKind::List3Close => "list3close",
            ListKind::List3Far => "list3far",
            ListKind::List4Close => "list4close",
            ListKind::List4Far => "list4far",
        }
    }
}

/// Per-box interaction lists, indexed by box id. Each list is sorted and
/// duplicate-free.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InteractionLists {
    pub list1: Vec<Vec<usize>>,
    pub list2: Vec<Vec<usize>>,
    pub list3close: Vec<Vec<usize>>,
    pub list3far: Vec<Vec<usize>>,
    pub list4close: Vec<Vec<usize>>,
    pub list4far: Vec<Vec<usize>>,
}

impl InteractionLists {
    fn empty(n: usize) -> Self {
        Self {
            list1: vec![Vec::new(); n],
            list2: vec![Vec::new(); n],
            list3close: vec![Vec::new(); n],
            list3far: vec![Vec::new(); n],
            list4close: vec![Vec::new(); n],
            list4far: vec![Vec::new(); n],
        }
    }

    pub fn get(&self, kind: ListKind) -> &[Vec<usize>] {
        match kind {
            ListKind::List1 => &self.list1,
            ListKind::List2 => &self.list2,
            ListKind::List3Close => &self.list3close,
            ListKind::List3Far => &self.list3far,
            ListKind::List4Close => &self.list4close,
            ListKind::List4Far => &self.list4far,
        }
    }

    fn get_mut(&mut self, kind: ListKind) -> &mut Vec<Vec<usize>> {
        match kind {
            ListKind::List1 => &mut self.list1,
            ListKind::List2 => &mut self.list2,
            ListKind::List3Close => &mut self.list3close,
            ListKind::List3Far => &mut self.list3far,
            ListKind::List4Close => &mut self.list4close,
            ListKind::List4Far => &mut self.list4far,
        }
    }

    pub fn total(&self, kind: ListKind) -> usize {
        self.get(kind).iter().map(Vec::len).sum()
    }

    /// Writes `box_id,list_name,member_box_id` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "box_id,list_name,member_box_id")?;
        for b in 0..self.list1.len() {
            for kind in ListKind::ALL {
                for &m in &self.get(kind)[b] {
                    writeln!(out, "{},{},{}", b, kind.name(), m)?;
                }
            }
        }
        Ok(())
    }
}

fn normalize(mut v: Vec<usize>) -> Vec<usize> {
    v.sort_unstable();
    v.dedup();
    v
}

fn has_sources(tree: &Tree, d: usize) -> bool {
    tree.boxes[d].subtree_sources > 0
}

/// Builds all lists top-down, carrying per-box candidate sets from parents.
pub fn build_lists(tree: &Tree) -> InteractionLists {
    let n = tree.len();
    let mut lists = InteractionLists::empty(n);
    // leaves coarser than b and adjacent to it
    let mut coarse_leaves: Vec<Vec<usize>> = vec![Vec::new(); n];

    for b in 0..n {
        let bx = &tree.boxes[b];
        if !(bx.is_target_box || bx.is_target_ancestor) {
            continue;
        }
        let colleagues = tree.k_colleagues(b, 2);

        let mut list4 = Vec::new();
        for &c in &colleagues {
            if c != b && tree.boxes[c].is_leaf && !tree.adjacent(b, c) {
                list4.push(c);
            }
        }
        if let Some(p) = bx.parent {
            let mut candidates = coarse_leaves[p].clone();
            candidates.extend(
                tree.k_colleagues(p, 1)
                    .into_iter()
                    .filter(|&c| c != p && tree.boxes[c].is_leaf),
            );
            for d in candidates {
                if tree.adjacent(b, d) {
                    coarse_leaves[b].push(d);
                } else {
                    list4.push(d);
                }
            }

            let mut list2 = Vec::new();
            for c in tree.k_colleagues(p, 2) {
                for &d in &tree.boxes[c].children {
                    if !tree.is_colleague(b, d, 2) && has_sources(tree, d) {
                        list2.push(d);
                    }
                }
            }
            lists.list2[b] = normalize(list2);
        }
        list4.retain(|&d| has_sources(tree, d));

        let mut candidates = list4;
        if let Some(p) = bx.parent {
            candidates.extend(lists.list4close[p].iter().copied());
        }
        let (far, close): (Vec<usize>, Vec<usize>) = candidates.into_iter().partition(|&d| tree.sep_tcr_box(b, d));
        lists.list4close[b] = normalize(close);
        lists.list4far[b] = normalize(far);

        if !bx.is_target_box {
            continue;
        }

        let mut list1 = tree.leaves_under(b);
        list1.extend(coarse_leaves[b].iter().copied());
        for c in tree.k_colleagues(b, 1) {
            if c == b {
                continue;
            }
            let mut stack = vec![c];
            while let Some(d) = stack.pop() {
                if !tree.adjacent(b, d) {
                    continue;
                }
                if tree.boxes[d].is_leaf {
                    list1.push(d);
                } else {
                    stack.extend(tree.boxes[d].children.iter().copied());
                }
            }
        }
        list1.retain(|&d| tree.boxes[d].is_source_box);
        lists.list1[b] = normalize(list1);

        let mut close = Vec::new();
        let mut far = Vec::new();
        for &c in &colleagues {
            if c == b {
                continue;
            }
            let mut stack: Vec<usize> = tree.boxes[c].children.clone();
            while let Some(d) = stack.pop() {
                if tree.adjacent(b, d) {
                    stack.extend(tree.boxes[d].children.iter().copied());
                    continue;
                }
                // d is in List 3; split its subtree into far and close parts
                let mut walk = vec![d];
                while let Some(e) = walk.pop() {
                    if !has_sources(tree, e) {
                        continue;
                    }
                    if tree.sep_box_tcr(e, b) {
                        far.push(e);
                    } else if tree.boxes[e].is_leaf {
                        close.push(e);
                    } else {
                        walk.extend(tree.boxes[e].children.iter().copied());
                    }
                }
            }
        }
        lists.list3close[b] = normalize(close);
        lists.list3far[b] = normalize(far);
    }
    lists
}

/// Replaces every List 3 far entry whose subtree holds fewer than
/// `threshold` sources by its source-owning leaf descendants in List 3 close.
pub fn far_to_close_demotion(lists: &InteractionLists, tree: &Tree, threshold: usize) -> InteractionLists {
    let mut out = lists.clone();
    if threshold == 0 {
        return out;
    }
    for b in 0..tree.len() {
        let (keep, demote): (Vec<usize>, Vec<usize>) = lists.list3far[b]
            .iter()
            .partition(|&&d| tree.boxes[d].subtree_sources >= threshold);
        if demote.is_empty() {
            continue;
        }
        let mut close = out.list3close[b].clone();
        for d in demote {
            close.extend(tree.leaves_under(d).into_iter().filter(|&l| tree.boxes[l].is_source_box));
        }
        out.list3close[b] = normalize(close);
        out.list3far[b] = keep;
    }
    out
}

/// Checks that every target box reaches every source exactly once through
/// its own lists and those of its ancestors.
pub fn check_coverage(tree: &Tree, lists: &InteractionLists) -> Result<(), String> {
    let nsrc = tree.boxes.iter().map(|b| b.sources.len()).sum::<usize>();
    let mut counts = vec![0u32; tree.particles.len()];
    for b in 0..tree.len() {
        if !tree.boxes[b].is_target_box {
            continue;
        }
        counts.iter_mut().for_each(|c| *c = 0);
        let mut add_owned = |d: usize, counts: &mut Vec<u32>| {
            for &p in &tree.boxes[d].particles {
                if tree.particles[p].kind == crate::tree::ParticleKind::Source {
                    counts[p] += 1;
                }
            }
        };
        let add_subtree = |d: usize, counts: &mut Vec<u32>, add: &mut dyn FnMut(usize, &mut Vec<u32>)| {
            add(d, counts);
            for e in tree.descendants(d) {
                add(e, counts);
            }
        };
        for &d in lists.list1[b].iter().chain(&lists.list3close[b]).chain(&lists.list4close[b]) {
            add_owned(d, &mut counts);
        }
        for &d in &lists.list3far[b] {
            add_subtree(d, &mut counts, &mut add_owned);
        }
        for w in std::iter::once(b).chain(tree.ancestors(b)) {
            for &d in lists.list2[w].iter().chain(&lists.list4far[w]) {
                add_subtree(d, &mut counts, &mut add_owned);
            }
        }
        let mut reached = 0;
        for (p, &c) in counts.iter().enumerate() {
            if tree.particles[p].kind != crate::tree::ParticleKind::Source {
                continue;
            }
            if c != 1 {
                return Err(format!("box {b} reaches source particle {p} {c} times"));
            }
            reached += 1;
        }
        if reached != nsrc {
            return Err(format!("box {b} reaches {reached} of {nsrc} sources"));
        }
    }
    Ok(())
}

/// Size bounds on List 2 and the List 4 variants; one message per violation.
pub fn check_size_bounds(tree: &Tree, lists: &InteractionLists) -> Vec<String> {
    let mut errs = Vec::new();
    for b in 0..tree.len() {
        let l4 = brute::list4(tree, b).len();
        for (name, len, bound) in [
            ("list2", lists.list2[b].len(), 75),
            ("list4", l4, 21),
            ("list4close", lists.list4close[b].len(), 42),
            ("list4far", lists.list4far[b].len(), 63),
        ] {
            if len > bound {
                errs.push(format!("box {b}: |{name}| = {len} > {bound}"));
            }
        }
    }
    errs
}

/// Convergence-factor certificates of the far lists; one message per pair
/// whose geometric ratio exceeds the guaranteed value.
pub fn check_separation(tree: &Tree, lists: &InteractionLists) -> Vec<String> {
    let tf = tree.t_f;
    let s2 = std::f64::consts::SQRT_2;
    let tol = 1e-12;
    let mut errs = Vec::new();
    for b in 0..tree.len() {
        let bx = &tree.boxes[b];
        for &d in &lists.list2[b] {
            let dx = &tree.boxes[d];
            let closest = (bx.center - dx.center).norm() - s2 * dx.radius;
            let ratio = (s2 + tf) * bx.radius / closest;
            if !(closest > 0.0 && ratio <= (s2 + tf) / (6.0 - s2) + tol) {
                errs.push(format!("list2 pair ({b}, {d}) ratio {ratio}"));
            }
        }
        for &d in &lists.list3far[b] {
            let dx = &tree.boxes[d];
            let closest = linf(bx.center, dx.center) - bx.radius * (1.0 + tf);
            let ratio = s2 * dx.radius / closest;
            if !(closest > 0.0 && ratio <= s2 / 3.0 + tol) {
                errs.push(format!("list3far pair ({b}, {d}) ratio {ratio}"));
            }
        }
        for &d in &lists.list4far[b] {
            let dx = &tree.boxes[d];
            let closest = linf(bx.center, dx.center) - dx.radius;
            let ratio = (s2 + tf) * bx.radius / closest;
            if !(closest > 0.0 && ratio <= (s2 + tf) / (3.0 * (1.0 + tf)) + tol) {
                errs.push(format!("list4far pair ({b}, {d}) ratio {ratio}"));
            }
        }
    }
    errs
}

/// Lists computed by testing every box pair directly against the
/// definitions. Quadratic or worse in the box count; meant for testing.
pub mod brute {
    use super::*;

    fn in_colleague_descendants(tree: &Tree, b: usize, d: usize) -> bool {
        tree.ancestors(d).any(|a| tree.is_colleague(a, b, 2))
    }

    /// List 3 before filtering by sources.
    pub fn list3(tree: &Tree, b: usize) -> Vec<usize> {
        (0..tree.len())
            .filter(|&d| {
                in_colleague_descendants(tree, b, d)
                    && !tree.adjacent(d, b)
                    && tree
                        .ancestors(d)
                        .filter(|&w| in_colleague_descendants(tree, b, w))
                        .all(|w| tree.adjacent(w, b))
            })
            .collect()
    }

    /// List 4 of `b` (source leaves only).
    pub fn list4(tree: &Tree, b: usize) -> Vec<usize> {
        let parent = tree.boxes[b].parent;
        (0..tree.len())
            .filter(|&d| {
                let dx = &tree.boxes[d];
                if !dx.is_leaf || !dx.is_source_box {
                    return false;
                }
                let direct = tree.is_colleague(d, b, 2) && !tree.adjacent(d, b);
                let inherited = parent.is_some_and(|p| {
                    tree.ancestors(b).any(|a| tree.is_colleague(d, a, 2))
                        && tree.adjacent(d, p)
                        && !tree.adjacent(d, b)
                });
                direct || inherited
            })
            .collect()
    }

    fn list4close(tree: &Tree, b: usize) -> Vec<usize> {
        let mut out: Vec<usize> = std::iter::once(b)
            .chain(tree.ancestors(b))
            .flat_map(|w| list4(tree, w))
            .filter(|&d| !tree.sep_tcr_box(b, d))
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn build(tree: &Tree) -> InteractionLists {
        let n = tree.len();
        let mut lists = InteractionLists::empty(n);
        for b in 0..n {
            let bx = &tree.boxes[b];
            if !(bx.is_target_box || bx.is_target_ancestor) {
                continue;
            }
            if let Some(p) = bx.parent {
                lists.list2[b] = (0..n)
                    .filter(|&d| {
                        tree.boxes[d].parent.is_some_and(|dp| tree.is_colleague(dp, p, 2))
                            && !tree.is_colleague(d, b, 2)
                            && has_sources(tree, d)
                    })
                    .collect();
            }
            lists.list4close[b] = list4close(tree, b);
            let mut far: Vec<usize> = list4(tree, b);
            if let Some(p) = bx.parent {
                far.extend(list4close(tree, p));
            }
            far.retain(|&d| tree.sep_tcr_box(b, d));
            lists.list4far[b] = normalize(far);

            if !bx.is_target_box {
                continue;
            }
            lists.list1[b] = (0..n)
                .filter(|&d| {
                    let dx = &tree.boxes[d];
                    dx.is_leaf
                        && dx.is_source_box
                        && (d == b || tree.is_ancestor(b, d) || tree.adjacent(d, b))
                })
                .collect();

            let l3 = list3(tree, b);
            let in_ext = |d: usize| l3.contains(&d) || tree.ancestors(d).any(|a| l3.contains(&a));
            lists.list3close[b] = (0..n)
                .filter(|&d| tree.boxes[d].is_leaf && has_sources(tree, d) && in_ext(d) && !tree.sep_box_tcr(d, b))
                .collect();
            lists.list3far[b] = (0..n)
                .filter(|&d| {
                    has_sources(tree, d)
                        && in_ext(d)
                        && tree.sep_box_tcr(d, b)
                        && tree
                            .ancestors(d)
                            .filter(|&w| in_ext(w))
                            .all(|w| !tree.sep_box_tcr(w, b))
                })
                .collect();
        }
        for kind in ListKind::ALL {
            for l in lists.get_mut(kind).iter_mut() {
                *l = normalize(std::mem::take(l));
            }
        }
        lists
    }
}
