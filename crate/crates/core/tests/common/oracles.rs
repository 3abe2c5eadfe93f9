//! Brute-force metric formulas, written independently of the library.

use std::collections::HashSet;

pub fn brute_prf(p: &[bool], g: &[bool]) -> (f64, f64, f64) {
    let tp = p.iter().zip(g).filter(|(a, b)| **a && **b).count() as f64;
    let pp = p.iter().filter(|a| **a).count() as f64;
    let gp = g.iter().filter(|a| **a).count() as f64;
    let prec = if pp > 0.0 { tp / pp } else { 0.0 };
    let rec = if gp > 0.0 { tp / gp } else { 0.0 };
    let f1 = if prec + rec > 0.0 {
        2.0 * prec * rec / (prec + rec)
    } else {
        0.0
    };
    (prec, rec, f1)
}

pub fn brute_mcc(p: &[bool], g: &[bool]) -> f64 {
    let (mut tp, mut tn, mut fp, mut fn_) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for (&a, &b) in p.iter().zip(g) {
        match (a, b) {
            (true, true) => tp += 1.0,
            (false, false) => tn += 1.0,
            (true, false) => fp += 1.0,
            (false, true) => fn_ += 1.0,
        }
    }
    let den = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
    if den == 0.0 {
        0.0
    } else {
        (tp * tn - fp * fn_) / den.sqrt()
    }
}

pub fn brute_kappa(a: &[u8], b: &[u8]) -> f64 {
    let n = a.len() as f64;
    let po = a.iter().zip(b).filter(|(x, y)| x == y).count() as f64 / n;
    let cats: HashSet<u8> = a.iter().chain(b).copied().collect();
    let pe: f64 = cats
        .iter()
        .map(|c| {
            let ca = a.iter().filter(|x| *x == c).count() as f64;
            let cb = b.iter().filter(|x| *x == c).count() as f64;
            ca * cb / (n * n)
        })
        .sum();
    (po - pe) / (1.0 - pe)
}
