use csnet_core::features::feature_dim;
use csnet_core::filterbank::{random_filters, LearningMeta, StageFilters};
use csnet_core::sensing::{gaussian_measurement, omp};
use csnet_core::tensor::{conv2d_same, dct_matrix, dot, least_squares};
use csnet_core::{BlockSpec, FeatureExtractor, FilterBank, FilterMethod, Image, Matrix, PatchConfig};
use proptest::prelude::*;

fn image(h: usize, w: usize) -> impl Strategy<Value = Image> {
    prop::collection::vec(-1.0f64..1.0, h * w).prop_map(move |px| Image::new(h, w, px).unwrap())
}

fn naive_conv(img: &Image, f: &Matrix) -> Image {
    let (h, w) = (img.height(), img.width());
    let (kh, kw) = (f.rows() as isize, f.cols() as isize);
    let mut out = Image::zeros(h, w);
    for r in 0..h as isize {
        for c in 0..w as isize {
            let mut acc = 0.0;
            for i in 0..kh {
                for j in 0..kw {
                    let (rr, cc) = (r + i - kh / 2, c + j - kw / 2);
                    if rr >= 0 && cc >= 0 && rr < h as isize && cc < w as isize {
                        acc += f.get(i as usize, j as usize) * img.get(rr as usize, cc as usize);
                    }
                }
            }
            out.set(r as usize, c as usize, acc);
        }
    }
    out
}

fn bank(widths: &[usize], seed: u64) -> FilterBank {
    let patch = PatchConfig::square(3).unwrap();
    let stages: Vec<StageFilters> =
        widths.iter().enumerate().map(|(s, &l)| random_filters(l, &patch, seed + s as u64).unwrap()).collect();
    let meta = LearningMeta { method: FilterMethod::Random, seed, sparsity: 3, measurements: 5, patch };
    FilterBank::new(stages, meta).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn convolution_matches_loops_and_is_linear(
        a in image(9, 11), b in image(9, 11),
        f in prop::collection::vec(-1.0f64..1.0, 9), s in -3.0f64..3.0,
    ) {
        let f = Matrix::from_vec(3, 3, f).unwrap();
        let ca = conv2d_same(&a, &f).unwrap();
        let naive = naive_conv(&a, &f);
        for (u, v) in ca.pixels().iter().zip(naive.pixels()) {
            prop_assert!((u - v).abs() < 1e-12);
        }
        let mix = Image::new(9, 11, a.pixels().iter().zip(b.pixels()).map(|(x, y)| x + s * y).collect()).unwrap();
        let cb = conv2d_same(&b, &f).unwrap();
        let cm = conv2d_same(&mix, &f).unwrap();
        for ((m, x), y) in cm.pixels().iter().zip(ca.pixels()).zip(cb.pixels()) {
            prop_assert!((m - (x + s * y)).abs() < 1e-10);
        }
    }

    #[test]
    fn dct_is_orthonormal(d in 1usize..80) {
        let psi = dct_matrix(d).unwrap();
        let g = psi.matmul(&psi.transpose()).unwrap();
        prop_assert!(g.max_abs_diff(&Matrix::identity(d)) < 1e-10);
    }

    #[test]
    fn least_squares_residual_is_orthogonal(
        a in prop::collection::vec(-1.0f64..1.0, 24), y in prop::collection::vec(-1.0f64..1.0, 8),
    ) {
        let a = Matrix::from_vec(8, 3, a).unwrap();
        if let Ok(x) = least_squares(&a, &y) {
            let fit = a.matvec(&x).unwrap();
            let r: Vec<f64> = y.iter().zip(&fit).map(|(u, v)| u - v).collect();
            for atr in a.tr_matvec(&r).unwrap() {
                prop_assert!(atr.abs() < 1e-9);
            }
        }
    }

    #[test]
    fn omp_residuals_shrink_and_stay_orthogonal(
        seed in 0u64..10_000, y in prop::collection::vec(-1.0f64..1.0, 10), k in 1usize..6,
    ) {
        let phi = gaussian_measurement(20, 10, seed).unwrap();
        let out = omp(&y, &phi, k, 0.0).unwrap();
        for pair in out.residual_history.windows(2) {
            prop_assert!(pair[1] <= pair[0] + 1e-12);
        }
        let mut sorted = out.support.clone();
        sorted.sort_unstable();
        sorted.dedup();
        prop_assert_eq!(sorted.len(), out.support.len());
        let r: Vec<f64> = y.iter().zip(phi.measure(&out.sparse_vector).unwrap()).map(|(u, v)| u - v).collect();
        for &j in &out.support {
            prop_assert!(dot(&phi.phi().column(j), &r).abs() < 1e-9);
        }
    }

    #[test]
    fn features_ignore_positive_power_of_two_scaling(img in image(14, 14), e in -4i32..5, seed in 0u64..100) {
        let ex = FeatureExtractor::new(bank(&[2, 3], seed), BlockSpec::new(7, 7, 0.0).unwrap()).unwrap();
        let scaled = Image::new(14, 14, img.pixels().iter().map(|p| p * 2f64.powi(e)).collect()).unwrap();
        prop_assert_eq!(ex.extract(&img).unwrap(), ex.extract(&scaled).unwrap());
    }

    #[test]
    fn feature_length_follows_the_formula(l1 in 1usize..4, l2 in 1usize..5, half in prop::bool::ANY) {
        let blocks = BlockSpec::new(7, 7, if half { 0.5 } else { 0.0 }).unwrap();
        let ex = FeatureExtractor::new(bank(&[l1, l2], 3), blocks).unwrap();
        let b = blocks.block_count(28, 28);
        let f = ex.extract(&Image::filled(28, 28, 0.25)).unwrap();
        prop_assert_eq!(f.dim(), (1 << l2) * l1 * b);
        prop_assert_eq!(feature_dim(l2, l1, b), f.dim());
        prop_assert_eq!(f.sum(), (l1 * b * 49) as f64);
    }
}
