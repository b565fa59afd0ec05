/// Formats `x` with 9 significant digits: fixed notation for magnitudes in
/// `[1e−4, 1e9)`, scientific otherwise.
pub fn sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.8e}");
    let exp: i32 = sci.rsplit_once('e').and_then(|(_, e)| e.parse().ok()).unwrap_or(0);
    if (-4..9).contains(&exp) {
        format!("{:.*}", (8 - exp) as usize, x)
    } else {
        sci
    }
}

pub fn sig9_list(xs: &[f64]) -> String {
    xs.iter().map(|x| sig9(*x)).collect::<Vec<_>>().join(", ")
}
