//! Independent reference implementations checked against the library.

use csnet_core::classifier::{primal_objective, train_binary, train_svm, SvmParams};
use csnet_core::features::{assemble_feature, block_histograms, hash_group, heaviside, BinaryMap, HashedMap};
use csnet_core::filterbank::{extract_patches, learn_cs_filters, learn_pca_filters, PatchGram};
use csnet_core::sensing::{gaussian_measurement, omp};
use csnet_core::tensor::{dct_matrix, least_squares};
use csnet_core::{BlockSpec, FeatureVector, Image, Matrix, PatchConfig};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn to_na(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.data())
}

fn na_lstsq(a: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    a.clone().pseudo_inverse(1e-14).unwrap() * y
}

#[test]
fn least_squares_matches_pseudo_inverse() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..20 {
        let a = Matrix::from_vec(10, 4, (0..40).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let y: Vec<f64> = (0..10).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = least_squares(&a, &y).unwrap();
        let reference = na_lstsq(&to_na(&a), &DVector::from_vec(y.clone()));
        for (u, v) in x.iter().zip(reference.iter()) {
            assert!((u - v).abs() < 1e-8);
        }
        // Residual orthogonal to the column span.
        let r: Vec<f64> = y.iter().zip(a.matvec(&x).unwrap()).map(|(a, b)| a - b).collect();
        let atr = a.tr_matvec(&r).unwrap();
        let ynorm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(atr.iter().all(|v| v.abs() < 1e-8 * ynorm));
    }
}

/// Best `k`-sparse least-squares fit by enumerating every support.
fn exhaustive_best(phi: &Matrix, y: &[f64], k: usize) -> (Vec<usize>, Vec<f64>) {
    let d = phi.cols();
    let a = to_na(phi);
    let yv = DVector::from_vec(y.to_vec());
    let mut best = (f64::INFINITY, vec![], vec![]);
    let mut support: Vec<usize> = (0..k).collect();
    loop {
        let sub = a.select_columns(support.iter());
        let coef = na_lstsq(&sub, &yv);
        let res = (&yv - &sub * &coef).norm();
        if res < best.0 {
            best = (res, support.clone(), coef.iter().copied().collect());
        }
        // next combination
        let mut i = k;
        while i > 0 && support[i - 1] == d - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        support[i - 1] += 1;
        for j in i..k {
            support[j] = support[j - 1] + 1;
        }
    }
    let mut x = vec![0.0; d];
    for (&s, &c) in best.1.iter().zip(&best.2) {
        x[s] = c;
    }
    (best.1, x)
}

fn separated_sparse(d: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut x = vec![0.0; d];
    let mut idx: Vec<usize> = (0..d).collect();
    for i in 0..k {
        let j = rng.random_range(i..d);
        idx.swap(i, j);
    }
    for (rank, &i) in idx[..k].iter().enumerate() {
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        x[i] = sign * 10f64.powi(rank as i32);
    }
    x
}

/// Textbook OMP on nalgebra: argmax correlation, refit, repeat.
fn reference_omp(phi: &Matrix, y: &[f64], k: usize) -> Vec<f64> {
    let a = to_na(phi);
    let yv = DVector::from_vec(y.to_vec());
    let mut support: Vec<usize> = Vec::new();
    let mut r = yv.clone();
    let mut coef = DVector::zeros(0);
    for _ in 0..k {
        let corr = a.transpose() * &r;
        let j = (0..a.ncols())
            .filter(|j| !support.contains(j))
            .max_by(|&i, &j| corr[i].abs().total_cmp(&corr[j].abs()).then(j.cmp(&i)))
            .unwrap();
        support.push(j);
        let sub = a.select_columns(support.iter());
        coef = na_lstsq(&sub, &yv);
        r = &yv - &sub * &coef;
    }
    let mut x = vec![0.0; a.ncols()];
    for (&s, &c) in support.iter().zip(coef.iter()) {
        x[s] = c;
    }
    x
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

#[test]
fn omp_matches_exhaustive_search_whenever_it_fits_exactly() {
    let (d, m) = (12, 8);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut exact = 0;
    for trial in 0..50 {
        let k = 1 + trial % 3;
        let phi = gaussian_measurement(d, m, 100 + trial as u64).unwrap();
        let x = separated_sparse(d, k, &mut rng);
        let y = phi.measure(&x).unwrap();
        let got = omp(&y, &phi, k, 0.0).unwrap();
        assert!(max_diff(&got.sparse_vector, &reference_omp(phi.phi(), &y, k)) < 1e-9, "trial {trial}");
        let (_, best) = exhaustive_best(phi.phi(), &y, k);
        let ynorm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if got.residual_norm <= 1e-9 * ynorm {
            exact += 1;
            assert!(max_diff(&got.sparse_vector, &best) < 1e-6, "trial {trial}");
        }
    }
    // Greedy selection misses the support on a few of these coherent 8x12 draws.
    assert!(exact >= 40, "OMP fitted only {exact} of 50 instances exactly");
}

#[test]
fn omp_exact_support_recovery_rate() {
    let (d, k) = (64, 3);
    let m = (4.0 * k as f64 * (d as f64).ln()).ceil() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut hits = 0;
    for trial in 0..200 {
        let phi = gaussian_measurement(d, m, 1000 + trial).unwrap();
        let x = separated_sparse(d, k, &mut rng);
        let y = phi.measure(&x).unwrap();
        let r = omp(&y, &phi, k, 0.0).unwrap();
        let mut got = r.support.clone();
        got.sort_unstable();
        let truth: Vec<usize> = (0..d).filter(|&i| x[i] != 0.0).collect();
        if got == truth {
            hits += 1;
        }
    }
    assert!(hits >= 190, "recovered {hits}/200 supports");
}

#[test]
fn pca_eigenvalues_match_reference_solver() {
    let cfg = PatchConfig::square(3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cols: Vec<Vec<f64>> = (0..200)
        .map(|_| {
            let p: Vec<f64> = (0..9).map(|i| rng.random_range(-1.0..1.0) * (1.0 + i as f64 * 0.3)).collect();
            let mean = p.iter().sum::<f64>() / 9.0;
            p.iter().map(|v| v - mean).collect()
        })
        .collect();
    let x = Matrix::from_columns(&cols).unwrap();
    let gram = PatchGram::from_patches(&x).finish().unwrap();
    let stage = learn_pca_filters(&x, 9, &cfg).unwrap();

    let mut reference: Vec<f64> = SymmetricEigen::new(to_na(&gram)).eigenvalues.iter().copied().collect();
    reference.sort_by(|a, b| b.total_cmp(a));
    let w = Matrix::from_columns(&stage.filters.iter().map(|f| f.spatial.data().to_vec()).collect::<Vec<_>>()).unwrap();
    let diag = w.transpose().matmul(&gram).unwrap().matmul(&w).unwrap();
    let mut off = 0.0;
    let mut total = 0.0;
    for i in 0..9 {
        assert!((diag.get(i, i) - reference[i]).abs() < 1e-6, "eigenvalue {i}");
        for j in 0..9 {
            total += diag.get(i, j).powi(2);
            if i != j {
                off += diag.get(i, j).powi(2);
            }
        }
    }
    assert!(off / total < 1e-12);
    // Mutually orthonormal filters.
    let gw = w.transpose().matmul(&w).unwrap();
    assert!(gw.max_abs_diff(&Matrix::identity(9)) < 1e-8);
}

#[test]
fn cs_filter_beats_single_atom_on_structured_patches() {
    let cfg = PatchConfig::square(3).unwrap();
    let psi = dct_matrix(9).unwrap();
    // Two orthogonal zero-mean basis patches.
    let b1 = psi.row(1).to_vec();
    let b2 = psi.row(4).to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cols: Vec<Vec<f64>> = (0..300)
        .map(|_| {
            let (a, b): (f64, f64) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            b1.iter().zip(&b2).map(|(u, v)| a * u + b * v).collect()
        })
        .collect();
    let x = Matrix::from_columns(&cols).unwrap();
    let (k, m, seed) = (3, 5, 21);
    let stage = learn_cs_filters(&x, 3, k, m, seed, &cfg).unwrap();

    // Recompute the measured columns independently.
    let gram = PatchGram::from_patches(&x).finish().unwrap();
    let phi = gaussian_measurement(9, m, seed).unwrap();
    let measured = phi.phi().matmul(&psi.matmul(&gram).unwrap()).unwrap();
    let mut order: Vec<usize> = (0..9).collect();
    let energy = |j: usize| measured.column(j).iter().map(|v| v * v).sum::<f64>();
    order.sort_by(|&a, &b| energy(b).total_cmp(&energy(a)).then(a.cmp(&b)));

    for (f, &col) in stage.filters.iter().zip(&order) {
        assert_eq!(f.dct_nonzeros(), k);
        let y = measured.column(col);
        let ynorm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        // Residual of the (rescaled) K-sparse reconstruction.
        let approx = phi.measure(&f.dct).unwrap();
        let scale = approx.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() / approx.iter().map(|a| a * a).sum::<f64>();
        let res_k = approx.iter().zip(&y).map(|(a, b)| (scale * a - b).powi(2)).sum::<f64>().sqrt() / ynorm;
        let single = omp(&y, &phi, 1, 0.0).unwrap().residual_norm / ynorm;
        assert!(res_k < single, "K-sparse residual {res_k} vs single-atom {single}");
    }
}

#[test]
fn hashing_and_histograms_match_naive_loops() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let (h, w, l2) = (14, 14, 4);
    let maps: Vec<Image> =
        (0..l2).map(|_| Image::new(h, w, (0..h * w).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()).collect();
    let bits: Vec<BinaryMap> = maps.iter().map(heaviside).collect();
    let hashed = hash_group(&bits).unwrap();
    for p in 0..h * w {
        let mut code = 0u32;
        for (l, m) in maps.iter().enumerate() {
            if m.pixels()[p] > 0.0 {
                code += 2u32.pow(l as u32);
            }
        }
        assert_eq!(hashed.codes[p], code);
    }

    let spec = BlockSpec::new(7, 7, 0.0).unwrap();
    let hists = block_histograms(&hashed, &spec, 16).unwrap();
    assert_eq!(hists.len(), 4);
    let mut b = 0;
    for br in 0..2 {
        for bc in 0..2 {
            let mut naive = vec![0u32; 16];
            for r in br * 7..br * 7 + 7 {
                for c in bc * 7..bc * 7 + 7 {
                    naive[hashed.codes[r * w + c] as usize] += 1;
                }
            }
            assert_eq!(hists[b], naive);
            b += 1;
        }
    }
}

#[test]
fn feature_mass_is_conserved() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let spec = BlockSpec::new(7, 7, 0.0).unwrap();
    let groups: Vec<Vec<Vec<u32>>> = (0..3)
        .map(|_| {
            let hm = HashedMap { height: 28, width: 28, codes: (0..784).map(|_| rng.random_range(0..256)).collect() };
            block_histograms(&hm, &spec, 256).unwrap()
        })
        .collect();
    let f = assemble_feature(&groups).unwrap();
    assert_eq!(f.dim(), 256 * 3 * 16);
    assert_eq!(f.sum(), (3 * 16 * 49) as f64);
    let dense = f.to_dense();
    for slice in dense.chunks(256) {
        assert_eq!(slice.iter().sum::<f64>(), 49.0);
    }
}

/// Projected gradient on the box-constrained dual, run to high precision.
fn reference_dual_solution(xs: &[Vec<f64>], ys: &[f64], c: f64) -> (Vec<f64>, f64) {
    let n = xs.len();
    let aug: Vec<Vec<f64>> = xs.iter().map(|x| x.iter().copied().chain(std::iter::once(1.0)).collect()).collect();
    let q = DMatrix::from_fn(n, n, |i, j| ys[i] * ys[j] * aug[i].iter().zip(&aug[j]).map(|(a, b)| a * b).sum::<f64>());
    let lmax = SymmetricEigen::new(q.clone()).eigenvalues.max();
    let step = 1.0 / lmax;
    let mut alpha = DVector::zeros(n);
    for _ in 0..200_000 {
        let grad = &q * &alpha - DVector::from_element(n, 1.0);
        alpha = (alpha - grad * step).map(|a: f64| a.clamp(0.0, c));
    }
    let dim = aug[0].len();
    let mut w = vec![0.0; dim];
    for i in 0..n {
        for k in 0..dim {
            w[k] += alpha[i] * ys[i] * aug[i][k];
        }
    }
    let bias = w.pop().unwrap();
    (w, bias)
}

#[test]
fn svm_objective_matches_reference_optimizer() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let centers = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let mut raw = Vec::new();
    let mut labels = Vec::new();
    for i in 0..20 {
        let cls = i % 3;
        raw.push((0..3).map(|k| centers[cls][k] + rng.random_range(-0.6..0.6)).collect::<Vec<f64>>());
        labels.push(cls as u32);
    }
    let xs: Vec<FeatureVector> = raw.iter().map(|x| FeatureVector::from_dense(x)).collect();
    // Reference sees exactly the f32-narrowed features the solver sees.
    let narrowed: Vec<Vec<f64>> = xs.iter().map(FeatureVector::to_dense).collect();
    let params = SvmParams { c: 1.0, tol: 1e-6, max_iter: 10_000, seed: 4 };
    let model = train_svm(&xs, &labels, &params).unwrap();
    for (k, &cls) in model.classes.iter().enumerate() {
        let ys: Vec<f64> = labels.iter().map(|&l| if l == cls { 1.0 } else { -1.0 }).collect();
        let ours = primal_objective(&model.weights[k], model.biases[k], &xs, &ys, 1.0);
        let (rw, rb) = reference_dual_solution(&narrowed, &ys, 1.0);
        let theirs = primal_objective(&rw, rb, &xs, &ys, 1.0);
        assert!((ours - theirs).abs() <= 1e-3 * theirs, "class {cls}: {ours} vs {theirs}");
    }
}

#[test]
fn duplicated_training_set_gives_same_decision_function() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let raw: Vec<Vec<f64>> = (0..30).map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let ys: Vec<f64> = raw.iter().map(|x| if x[0] + 0.5 * x[1] > 0.1 { 1.0 } else { -1.0 }).collect();
    let xs: Vec<FeatureVector> = raw.iter().map(|x| FeatureVector::from_dense(x)).collect();
    let tol = 1e-6;
    let params = SvmParams { c: 1.0, tol, max_iter: 20_000, seed: 0 };
    let single = train_binary(&xs, &ys, &SvmParams { c: 2.0, ..params }).unwrap();
    let xs2: Vec<FeatureVector> = xs.iter().chain(xs.iter()).cloned().collect();
    let ys2: Vec<f64> = ys.iter().chain(ys.iter()).copied().collect();
    let doubled = train_binary(&xs2, &ys2, &params).unwrap();
    // Duplicating every point at C matches a single copy at 2C.
    for (a, b) in single.weights.iter().zip(&doubled.weights) {
        assert!((a - b).abs() < 2e-3, "{a} vs {b}");
    }
}

#[test]
fn two_class_hyperplanes_are_antiparallel() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let raw: Vec<Vec<f64>> = (0..40).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let labels: Vec<u32> = raw.iter().map(|x| u32::from(x[2] - x[0] > 0.0)).collect();
    let xs: Vec<FeatureVector> = raw.iter().map(|x| FeatureVector::from_dense(x)).collect();
    let model = train_svm(&xs, &labels, &SvmParams::default()).unwrap();
    for (a, b) in model.weights[0].iter().zip(&model.weights[1]) {
        assert!((a + b).abs() < 1e-9);
    }
    assert!((model.biases[0] + model.biases[1]).abs() < 1e-9);
}

#[test]
fn patch_matrix_of_stage_maps_counts_columns() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cfg = PatchConfig::square(7).unwrap();
    let maps: Vec<Image> = (0..10 * 4)
        .map(|_| Image::new(28, 28, (0..784).map(|_| rng.random::<f64>()).collect()).unwrap())
        .collect();
    let x = extract_patches(&maps, &cfg).unwrap();
    assert_eq!(x.cols(), 4 * 22 * 22 * 10);
}
