use super::segment::VideoSegment;

/// Sorted, disjoint `(start, end)` second pairs covering the same points as
/// the input. Touching spans are merged.
pub fn normalize_union(segments: &[VideoSegment]) -> Vec<(u32, u32)> {
    let mut spans: Vec<(u32, u32)> = segments
        .iter()
        .map(|s| (s.start().secs(), s.end().secs()))
        .collect();
    spans.sort_unstable();
    let mut merged: Vec<(u32, u32)> = Vec::with_capacity(spans.len());
    for (s, e) in spans {
        match merged.last_mut() {
            Some(last) if s <= last.1 => last.1 = last.1.max(e),
            _ => merged.push((s, e)),
        }
    }
    merged
}

fn measure(spans: &[(u32, u32)]) -> u64 {
    spans.iter().map(|(s, e)| (e - s) as u64).sum()
}

fn intersection(a: &[(u32, u32)], b: &[(u32, u32)]) -> u64 {
    let (mut i, mut j, mut total) = (0, 0, 0u64);
    while i < a.len() && j < b.len() {
        let lo = a[i].0.max(b[j].0);
        let hi = a[i].1.min(b[j].1);
        if hi > lo {
            total += (hi - lo) as u64;
        }
        if a[i].1 < b[j].1 {
            i += 1;
        } else {
            j += 1;
        }
    }
    total
}

/// Intersection over union of the two segment unions, in seconds.
///
/// Both empty gives 1. When neither union has positive measure the result
/// is 1 exactly when the point sets coincide.
pub fn interval_union_iou(predicted: &[VideoSegment], truth: &[VideoSegment]) -> f64 {
    let p = normalize_union(predicted);
    let t = normalize_union(truth);
    if p.is_empty() && t.is_empty() {
        return 1.0;
    }
    if p.is_empty() || t.is_empty() {
        return 0.0;
    }
    let inter = intersection(&p, &t);
    let union = measure(&p) + measure(&t) - inter;
    if union == 0 {
        return if p == t { 1.0 } else { 0.0 };
    }
    inter as f64 / union as f64
}
