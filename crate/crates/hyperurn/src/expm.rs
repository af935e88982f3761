//! Dense matrix exponential by scaling and squaring with Pade approximants
//! (Higham 2005), for the small matrices appearing in covariance integrands.

use nalgebra::DMatrix;

// 1-norm thresholds for the degree-3/5/7/9 approximants; above the last one
// the matrix is scaled down by a power of two and the degree-13 form is used.
const THETA_3: f64 = 1.495_585_217_958_292e-2;
const THETA_5: f64 = 2.539_398_330_063_23e-1;
const THETA_7: f64 = 9.504_178_996_162_932e-1;
const THETA_9: f64 = 2.097_847_961_257_068;
const THETA_13: f64 = 5.371_920_351_148_152;

pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let norm = one_norm(a);
    let a2 = a * a;
    let (u, v, squarings) = if norm < THETA_3 {
        let (u, v) = pade3(a, &a2);
        (u, v, 0)
    } else if norm < THETA_5 {
        let a4 = &a2 * &a2;
        let (u, v) = pade5(a, &a2, &a4);
        (u, v, 0)
    } else if norm < THETA_7 {
        let a4 = &a2 * &a2;
        let a6 = &a4 * &a2;
        let (u, v) = pade7(a, &a2, &a4, &a6);
        (u, v, 0)
    } else if norm < THETA_9 {
        let a4 = &a2 * &a2;
        let a6 = &a4 * &a2;
        let a8 = &a6 * &a2;
        let (u, v) = pade9(a, &a2, &a4, &a6, &a8);
        (u, v, 0)
    } else {
        let squarings = ((norm / THETA_13).log2().ceil() as i32).max(0);
        let scaled = a * 2f64.powi(-squarings);
        let s2 = &scaled * &scaled;
        let s4 = &s2 * &s2;
        let s6 = &s4 * &s2;
        let (u, v) = pade13(&scaled, &s2, &s4, &s6);
        (u, v, squarings)
    };

    let numer = &v + &u;
    let denom = &v - &u;
    let mut result = denom
        .lu()
        .solve(&numer)
        .expect("Pade denominator is nonsingular for admissible scaling");
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

fn one_norm(a: &DMatrix<f64>) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn identity(a: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::identity(a.nrows(), a.ncols())
}

fn pade3(a: &DMatrix<f64>, a2: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    const B: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
    let id = identity(a);
    let u = a * (a2 * B[3] + &id * B[1]);
    let v = a2 * B[2] + id * B[0];
    (u, v)
}

fn pade5(a: &DMatrix<f64>, a2: &DMatrix<f64>, a4: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    const B: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
    let id = identity(a);
    let u = a * (a4 * B[5] + a2 * B[3] + &id * B[1]);
    let v = a4 * B[4] + a2 * B[2] + id * B[0];
    (u, v)
}

fn pade7(
    a: &DMatrix<f64>,
    a2: &DMatrix<f64>,
    a4: &DMatrix<f64>,
    a6: &DMatrix<f64>,
) -> (DMatrix<f64>, DMatrix<f64>) {
    const B: [f64; 8] = [
        17_297_280.0,
        8_648_640.0,
        1_995_840.0,
        277_200.0,
        25_200.0,
        1_512.0,
        56.0,
        1.0,
    ];
    let id = identity(a);
    let u = a * (a6 * B[7] + a4 * B[5] + a2 * B[3] + &id * B[1]);
    let v = a6 * B[6] + a4 * B[4] + a2 * B[2] + id * B[0];
    (u, v)
}

fn pade9(
    a: &DMatrix<f64>,
    a2: &DMatrix<f64>,
    a4: &DMatrix<f64>,
    a6: &DMatrix<f64>,
    a8: &DMatrix<f64>,
) -> (DMatrix<f64>, DMatrix<f64>) {
    const B: [f64; 10] = [
        17_643_225_600.0,
        8_821_612_800.0,
        2_075_673_600.0,
        302_702_400.0,
        30_270_240.0,
        2_162_160.0,
        110_880.0,
        3_960.0,
        90.0,
        1.0,
    ];
    let id = identity(a);
    let u = a * (a8 * B[9] + a6 * B[7] + a4 * B[5] + a2 * B[3] + &id * B[1]);
    let v = a8 * B[8] + a6 * B[6] + a4 * B[4] + a2 * B[2] + id * B[0];
    (u, v)
}

fn pade13(
    a: &DMatrix<f64>,
    a2: &DMatrix<f64>,
    a4: &DMatrix<f64>,
    a6: &DMatrix<f64>,
) -> (DMatrix<f64>, DMatrix<f64>) {
    const B: [f64; 14] = [
        64_764_752_532_480_000.0,
        32_382_376_266_240_000.0,
        7_771_770_303_897_600.0,
        1_187_353_796_428_800.0,
        129_060_195_264_000.0,
        10_559_470_521_600.0,
        670_442_572_800.0,
        33_522_128_640.0,
        1_323_241_920.0,
        40_840_800.0,
        960_960.0,
        16_380.0,
        182.0,
        1.0,
    ];
    let id = identity(a);
    let w = a6 * B[13] + a4 * B[11] + a2 * B[9];
    let u = a * (a6 * &w + a6 * B[7] + a4 * B[5] + a2 * B[3] + &id * B[1]);
    let w2 = a6 * B[12] + a4 * B[10] + a2 * B[8];
    let v = a6 * w2 + a6 * B[6] + a4 * B[4] + a2 * B[2] + id * B[0];
    (u, v)
}
