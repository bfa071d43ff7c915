use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use scanstage::geometry::{point_triangle_distance, Point, Vec3};
use scanstage::scene::TriMesh;

pub fn cube() -> TriMesh {
    let v = (0..8)
        .map(|i| Point::new((i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64))
        .collect();
    let f = vec![
        [0, 2, 1], [1, 2, 3], [4, 5, 6], [5, 7, 6], [0, 1, 4], [1, 5, 4],
        [2, 6, 3], [3, 6, 7], [0, 4, 2], [2, 4, 6], [1, 3, 5], [3, 7, 5],
    ];
    TriMesh::new(v, f).unwrap()
}

/// Latitude-longitude sphere with `2 * slices * (stacks - 1)` faces.
pub fn uv_sphere(radius: f64, slices: usize, stacks: usize) -> TriMesh {
    let mut v = vec![Point::new(0.0, 0.0, radius)];
    for i in 1..stacks {
        let theta = std::f64::consts::PI * i as f64 / stacks as f64;
        for j in 0..slices {
            let phi = std::f64::consts::TAU * j as f64 / slices as f64;
            v.push(Point::new(radius * theta.sin() * phi.cos(), radius * theta.sin() * phi.sin(), radius * theta.cos()));
        }
    }
    v.push(Point::new(0.0, 0.0, -radius));
    let south = (v.len() - 1) as u32;
    let ring = |i: usize, j: usize| (1 + (i - 1) * slices + j % slices) as u32;
    let mut f = Vec::new();
    for j in 0..slices {
        f.push([0, ring(1, j), ring(1, j + 1)]);
        f.push([south, ring(stacks - 1, j + 1), ring(stacks - 1, j)]);
    }
    for i in 1..stacks - 1 {
        for j in 0..slices {
            let (a, b, c, d) = (ring(i, j), ring(i, j + 1), ring(i + 1, j), ring(i + 1, j + 1));
            f.push([a, c, d]);
            f.push([a, d, b]);
        }
    }
    TriMesh::new(v, f).unwrap()
}

/// Grid of `n x n` quads spanning `origin + s*u + t*v` for s, t in [0, 1].
fn grid(v: &mut Vec<Point>, f: &mut Vec<[u32; 3]>, origin: Point, u: Vec3, w: Vec3, n: usize) {
    let base = v.len() as u32;
    for i in 0..=n {
        for j in 0..=n {
            v.push(origin + u * (i as f64 / n as f64) + w * (j as f64 / n as f64));
        }
    }
    let id = |i: usize, j: usize| base + (i * (n + 1) + j) as u32;
    for i in 0..n {
        for j in 0..n {
            f.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            f.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
}

/// Drawer: a 0.4 x 0.5 x 0.2 box without its top, each face an `n x n` grid.
pub fn open_drawer_box(n: usize) -> TriMesh {
    let (x, y, z) = (Vec3::x() * 0.4, Vec3::y() * 0.5, Vec3::z() * 0.2);
    let o = Point::origin();
    let (mut v, mut f) = (Vec::new(), Vec::new());
    grid(&mut v, &mut f, o, x, y, n);
    grid(&mut v, &mut f, o, x, z, n);
    grid(&mut v, &mut f, o + y, x, z, n);
    grid(&mut v, &mut f, o, y, z, n);
    grid(&mut v, &mut f, o + x, y, z, n);
    TriMesh::new(v, f).unwrap()
}

/// Point in the middle of the drawer cavity.
pub const DRAWER_PROBE: [f64; 3] = [0.2, 0.25, 0.1];

/// Closed L-shaped prism: a 2 x 2 square minus its upper-right 1 x 1
/// quadrant, extruded 0.5 along z.
pub fn l_prism() -> TriMesh {
    let outline = [[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [1.0, 1.0], [1.0, 2.0], [0.0, 2.0]];
    let mut v: Vec<Point> = outline.iter().map(|p| Point::new(p[0], p[1], 0.0)).collect();
    v.extend(outline.iter().map(|p| Point::new(p[0], p[1], 0.5)));
    // caps: fan from the reflex corner (index 3) covers the L
    let cap = [[3, 4, 5], [3, 5, 0], [3, 0, 1], [3, 1, 2]];
    let mut f: Vec<[u32; 3]> = cap.iter().map(|t| [t[0], t[2], t[1]]).collect();
    f.extend(cap.iter().map(|t| [t[0] + 6, t[1] + 6, t[2] + 6]));
    for i in 0..6u32 {
        let j = (i + 1) % 6;
        f.push([i, j, j + 6]);
        f.push([i, j + 6, i + 6]);
    }
    TriMesh::new(v, f).unwrap()
}

/// `inliers` points on a 2 x 2 patch of the plane `normal . x = offset`
/// centered on `normal * offset`, with Gaussian noise along the normal, plus
/// `outliers` uniform points in the surrounding cube of side 2.
pub fn noisy_plane(seed: u64, normal: Vec3, offset: f64, sigma: f64, inliers: usize, outliers: usize) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = normal.normalize();
    let helper = if n.z.abs() < 0.9 { Vec3::z() } else { Vec3::x() };
    let u = n.cross(&helper).normalize();
    let w = n.cross(&u);
    let center = Point::from(n * offset);
    let noise = Normal::new(0.0, sigma).unwrap();
    let mut pts: Vec<Point> = (0..inliers)
        .map(|_| center + u * rng.gen_range(-1.0..1.0) + w * rng.gen_range(-1.0..1.0) + n * noise.sample(&mut rng))
        .collect();
    pts.extend((0..outliers).map(|_| {
        center + Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    }));
    pts
}

/// Vertices, face centroids and `extra` random surface samples of `m`.
pub fn surface_samples(m: &TriMesh, extra: usize, seed: u64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<Point> = m.vertices().to_vec();
    for k in 0..m.face_count() {
        let [a, b, c] = m.triangle(k);
        out.push(Point::from((a.coords + b.coords + c.coords) / 3.0));
    }
    for _ in 0..extra {
        let [a, b, c] = m.triangle(rng.gen_range(0..m.face_count()));
        let (mut s, mut t) = (rng.gen::<f64>(), rng.gen::<f64>());
        if s + t > 1.0 {
            (s, t) = (1.0 - s, 1.0 - t);
        }
        out.push(a + (b - a) * s + (c - a) * t);
    }
    out
}

fn one_sided(from: &[Point], to: &TriMesh) -> f64 {
    let tris: Vec<[Point; 3]> = (0..to.face_count()).map(|k| to.triangle(k)).collect();
    from.iter()
        .map(|p| {
            tris.iter()
                .map(|t| point_triangle_distance(p, &t[0], &t[1], &t[2]))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

/// Symmetric Hausdorff distance estimated from surface samples of both
/// meshes against the exact triangles of the other.
pub fn sampled_hausdorff(a: &TriMesh, b: &TriMesh, extra: usize) -> f64 {
    let ab = one_sided(&surface_samples(a, extra, 1), b);
    let ba = one_sided(&surface_samples(b, extra, 2), a);
    ab.max(ba)
}
