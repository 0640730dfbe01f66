//! Slow reference implementations, written without the crate's code paths.

#![allow(dead_code)]

/// ROUGE-N F by explicit clipped counting over n-gram lists.
pub fn rouge_n_f(pred: &[u8], reference: &[u8], n: usize) -> f64 {
    let grams = |t: &[u8]| -> Vec<Vec<u8>> {
        if t.len() < n {
            return Vec::new();
        }
        (0..=t.len() - n).map(|i| t[i..i + n].to_vec()).collect()
    };
    let p = grams(pred);
    let r = grams(reference);
    let mut distinct: Vec<&Vec<u8>> = Vec::new();
    for g in &p {
        if !distinct.contains(&g) {
            distinct.push(g);
        }
    }
    let mut matches = 0;
    for g in distinct {
        let in_p = p.iter().filter(|x| *x == g).count();
        let in_r = r.iter().filter(|x| *x == g).count();
        matches += in_p.min(in_r);
    }
    f_from(matches, p.len(), r.len())
}

/// ROUGE-L F from a full (|a|+1)×(|b|+1) LCS table.
pub fn rouge_l_f(pred: &[u8], reference: &[u8]) -> f64 {
    let (a, b) = (pred, reference);
    let mut t = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            t[i][j] = if a[i - 1] == b[j - 1] {
                t[i - 1][j - 1] + 1
            } else {
                t[i - 1][j].max(t[i][j - 1])
            };
        }
    }
    f_from(t[a.len()][b.len()], a.len(), b.len())
}

/// Harmonic mean of precision and recall.
fn f_from(matches: usize, pred_total: usize, ref_total: usize) -> f64 {
    if matches == 0 || pred_total == 0 || ref_total == 0 {
        return 0.0;
    }
    let p = matches as f64 / pred_total as f64;
    let r = matches as f64 / ref_total as f64;
    2.0 * p * r / (p + r)
}

/// Token strings for byte-coded sequences.
pub fn words(seq: &[u8]) -> Vec<String> {
    seq.iter().map(|b| format!("t{b}")).collect()
}

/// Mean rank per row, lower is better, ties averaged: computed by counting
/// strictly better and equal entries rather than sorting.
pub fn mean_ranks(cells: &[Vec<f64>], higher_is_better: &[bool]) -> Vec<f64> {
    let n = cells.len();
    let m = higher_is_better.len();
    (0..n)
        .map(|i| {
            let mut total = 0.0;
            for j in 0..m {
                let better = |x: f64, y: f64| if higher_is_better[j] { x > y } else { x < y };
                let ahead = (0..n).filter(|&k| better(cells[k][j], cells[i][j])).count();
                let level = (0..n).filter(|&k| cells[k][j] == cells[i][j]).count();
                total += ahead as f64 + (level as f64 + 1.0) / 2.0;
            }
            total / m as f64
        })
        .collect()
}
