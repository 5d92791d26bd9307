//! Textbook 3NF synthesis from functional dependencies: minimal cover,
//! one scheme per left-hand side, plus a key scheme when none holds a key.

use std::collections::{BTreeMap, BTreeSet};

pub type Attrs = BTreeSet<String>;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Fd {
    pub lhs: Attrs,
    pub rhs: String,
}

pub fn attrs(names: &[&str]) -> Attrs {
    names.iter().map(|s| s.to_string()).collect()
}

pub fn closure(start: &Attrs, fds: &[Fd]) -> Attrs {
    let mut out = start.clone();
    loop {
        let before = out.len();
        for fd in fds {
            if fd.lhs.is_subset(&out) {
                out.insert(fd.rhs.clone());
            }
        }
        if out.len() == before {
            return out;
        }
    }
}

pub fn minimal_cover(fds: &[Fd]) -> Vec<Fd> {
    let mut cover: Vec<Fd> = fds.to_vec();
    for i in 0..cover.len() {
        for a in cover[i].lhs.clone() {
            if cover[i].lhs.len() == 1 {
                break;
            }
            let mut smaller = cover[i].lhs.clone();
            smaller.remove(&a);
            if closure(&smaller, &cover).contains(&cover[i].rhs) {
                cover[i].lhs = smaller;
            }
        }
    }
    let mut i = 0;
    while i < cover.len() {
        let fd = cover.remove(i);
        if !closure(&fd.lhs, &cover).contains(&fd.rhs) {
            cover.insert(i, fd);
            i += 1;
        }
    }
    cover.sort();
    cover.dedup();
    cover
}

fn candidate_key(all: &Attrs, fds: &[Fd]) -> Attrs {
    let mut key = all.clone();
    for a in all {
        let mut smaller = key.clone();
        smaller.remove(a);
        if closure(&smaller, fds) == *all {
            key = smaller;
        }
    }
    key
}

pub fn synthesize(all: &Attrs, fds: &[Fd]) -> BTreeSet<Attrs> {
    let cover = minimal_cover(fds);
    let mut by_lhs: BTreeMap<Attrs, Attrs> = BTreeMap::new();
    for fd in &cover {
        by_lhs
            .entry(fd.lhs.clone())
            .or_insert_with(|| fd.lhs.clone())
            .insert(fd.rhs.clone());
    }
    let mut schemes: Vec<Attrs> = by_lhs.into_values().collect();
    if !schemes.iter().any(|s| closure(s, &cover) == *all) {
        schemes.push(candidate_key(all, &cover));
    }
    let snapshot = schemes.clone();
    schemes
        .into_iter()
        .filter(|s| !snapshot.iter().any(|t| t != s && s.is_subset(t)))
        .collect()
}
