use uavnav_tensor::{Adam, Tape, Tensor};

/// f(x) = Σ cᵢ (xᵢ − tᵢ)², minimised at x = t.
#[test]
fn adam_minimises_a_quadratic_in_100_steps() {
    let target = [0.7f32, -0.3, 0.05];
    let curvature = [1.0f32, 2.0, 0.5];
    let mut x = Tensor::new(&[3], vec![0.75, -0.25, 0.0]).unwrap();
    let mut adam = Adam::new(1e-2, [&x]);
    for _ in 0..100 {
        let mut tape = Tape::new();
        let xv = tape.param(&x);
        let t = tape.constant(Tensor::new(&[3], target.to_vec()).unwrap());
        let d = tape.sub(xv, t).unwrap();
        let sq = tape.square(d).unwrap();
        let w = tape.affine(sq, &curvature, &[0.0; 3]).unwrap();
        let loss = tape.sum(w).unwrap();
        let g = tape.backward(loss).unwrap().wrt(xv);
        adam.step(&mut [&mut x], &[g]).unwrap();
    }
    for (v, t) in x.data().iter().zip(target) {
        assert!((v - t).abs() < 1e-3, "{v} vs {t}");
    }
    assert_eq!(adam.step_count(), 100);
}
