pub type Vec3 = [f64; 3];

#[inline]
pub fn distance_sq(a: &Vec3, b: &Vec3) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

#[inline]
pub fn distance(a: &Vec3, b: &Vec3) -> f64 {
    distance_sq(a, b).sqrt()
}

#[inline]
pub fn midpoint(a: &Vec3, b: &Vec3) -> Vec3 {
    [
        0.5 * (a[0] + b[0]),
        0.5 * (a[1] + b[1]),
        0.5 * (a[2] + b[2]),
    ]
}
