use numkit::{Tape, Tensor};
use proptest::prelude::*;

fn values(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, n..=n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// conv1d agrees with an index-by-index reference convolution.
    #[test]
    fn conv1d_matches_reference(
        b in 1usize..3,
        cin in 1usize..4,
        cout in 1usize..4,
        l in 3usize..9,
        kw in 1usize..4,
        pad in 0usize..3,
        seed_x in 0u64..1000,
        seed_w in 0u64..1000,
    ) {
        let mut rx = numkit::Rng::new(seed_x, 0);
        let mut rw = numkit::Rng::new(seed_w, 1);
        let x = Tensor::gaussian(&mut rx, &[b, cin, l]);
        let w = Tensor::gaussian(&mut rw, &[cout, cin, kw]);
        let lout = (l + 2 * pad + 1).saturating_sub(kw);
        prop_assume!(lout >= 1);

        let mut tape = Tape::new();
        let xv = tape.constant(x.clone());
        let wv = tape.constant(w.clone());
        let y = tape.conv1d(xv, wv, pad).unwrap();
        let got = tape.value(y).data();

        for bi in 0..b {
            for o in 0..cout {
                for j in 0..lout {
                    let mut acc = 0.0;
                    for c in 0..cin {
                        for t in 0..kw {
                            let i = j + t;
                            if i >= pad && i - pad < l {
                                acc += x.data()[(bi * cin + c) * l + (i - pad)]
                                    * w.data()[(o * cin + c) * kw + t];
                            }
                        }
                    }
                    let g = got[(bi * cout + o) * lout + j];
                    prop_assert!((g - acc).abs() < 1e-9, "mismatch at ({bi},{o},{j}): {g} vs {acc}");
                }
            }
        }
    }

    /// Splitting a tensor and concatenating the slices is the identity.
    #[test]
    fn slice_concat_identity(
        rows in 1usize..5,
        cols in 2usize..7,
        cut_frac in 1usize..4,
        seed in 0u64..1000,
    ) {
        let mut rng = numkit::Rng::new(seed, 2);
        let t = Tensor::gaussian(&mut rng, &[rows, cols]);
        let cut = 1 + (cut_frac * (cols - 1)) / 4;
        prop_assume!(cut < cols);
        let mut tape = Tape::new();
        let x = tape.constant(t.clone());
        let a = tape.slice(x, 1, 0, cut).unwrap();
        let b = tape.slice(x, 1, cut, cols - cut).unwrap();
        let y = tape.concat(&[a, b], 1).unwrap();
        prop_assert_eq!(tape.value(y).data(), t.data());
    }

    /// sum(x) == mean(x) * numel for any tensor.
    #[test]
    fn sum_and_mean_are_consistent(n in 1usize..40, seed in 0u64..1000) {
        let mut rng = numkit::Rng::new(seed, 3);
        let t = Tensor::gaussian(&mut rng, &[n]);
        let mut tape = Tape::new();
        let x = tape.constant(t);
        let s = tape.reduce_sum(x).unwrap();
        let m = tape.reduce_mean(x).unwrap();
        let sv = tape.value(s).item().unwrap();
        let mv = tape.value(m).item().unwrap();
        prop_assert!((sv - mv * n as f64).abs() < 1e-9);
    }
}
