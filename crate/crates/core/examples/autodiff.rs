//! Reverse-mode differentiation on a small attention-like expression,
//! checked against a central difference.

use chronoweft::tensorcore::{Graph, Tensor};

fn value(x: &Tensor, w: &Tensor) -> f64 {
    let mut g = Graph::new();
    let (xv, wv) = (g.constant(x.clone()), g.param(w.clone()));
    let y = build(&mut g, xv, wv);
    g.value(y).item()
}

fn build(g: &mut Graph, x: chronoweft::tensorcore::Var, w: chronoweft::tensorcore::Var) -> chronoweft::tensorcore::Var {
    let q = g.matmul(x, w).unwrap();
    let xt = g.transpose(x).unwrap();
    let s = g.matmul(q, xt).unwrap();
    let a = g.softmax_rows(s).unwrap();
    let o = g.matmul(a, x).unwrap();
    let o = g.relu(o);
    g.sum(o)
}

fn main() {
    let x = Tensor::from_rows(&[&[0.3, -0.2], &[0.9, 0.1], &[-0.5, 0.4]]);
    let w = Tensor::from_rows(&[&[0.7, -0.1], &[0.2, 0.5]]);
    let mut g = Graph::new();
    let (xv, wv) = (g.constant(x.clone()), g.param(w.clone()));
    let y = build(&mut g, xv, wv);
    let grads = g.backward(y);
    let gw = grads.get(wv).expect("parameter gradient");
    println!("f = {:.6}", g.value(y).item());
    let h = 1e-6;
    for i in 0..4 {
        let (mut up, mut dn) = (w.clone(), w.clone());
        up.data_mut()[i] += h;
        dn.data_mut()[i] -= h;
        let fd = (value(&x, &up) - value(&x, &dn)) / (2.0 * h);
        println!("dW[{i}]  reverse {:+.8}  finite diff {:+.8}", gw.data()[i], fd);
    }
}
