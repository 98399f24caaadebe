//! Exhaustive k-medoids: tries every size-k subset of points as medoids.

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn cost(points: &[Vec<f64>], medoids: &[usize]) -> f64 {
    points
        .iter()
        .map(|p| medoids.iter().map(|&m| dist(p, &points[m])).fold(f64::INFINITY, f64::min))
        .sum()
}

fn subsets(n: usize, k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if cur.len() == k {
        out.push(cur.clone());
        return;
    }
    for i in start..n {
        cur.push(i);
        subsets(n, k, i + 1, cur, out);
        cur.pop();
    }
}

pub fn optimum(points: &[Vec<f64>], k: usize) -> f64 {
    let mut all = Vec::new();
    subsets(points.len(), k, 0, &mut Vec::new(), &mut all);
    all.iter().map(|m| cost(points, m)).fold(f64::INFINITY, f64::min)
}
