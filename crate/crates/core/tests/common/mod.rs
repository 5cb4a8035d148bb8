use ttfeedback::cross::CoreSystem;
use ttfeedback::matops::Mat;

/// Dense least-squares oracle: stack every weighted design block explicitly.
pub fn dense_core_solution(sys: &CoreSystem, values: &[f64], grads: &[f64], lambda: f64) -> Vec<f64> {
    let (p, r0) = sys.gl.shape();
    let (r1, q) = sys.gr.shape();
    let n = sys.basis.len();
    let d = sys.k + 1 + sys.dgr.len();
    let unknowns = r0 * n * r1;
    let phi = sys.basis.values();
    let dphi = sys.basis.derivs();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut rhs = Vec::new();
    for term in 0..=d {
        let w = if term == 0 { 1.0 } else { lambda.sqrt() };
        if term > 0 && lambda == 0.0 {
            break;
        }
        let var = term.wrapping_sub(1);
        for pi in 0..p {
            for j in 0..n {
                for qi in 0..q {
                    let mut row = vec![0.0; unknowns];
                    for a in 0..r0 {
                        let l = if term > 0 && var < sys.k { sys.dgl[var][(pi, a)] } else { sys.gl[(pi, a)] };
                        for i in 0..n {
                            let c = if term > 0 && var == sys.k { dphi[(j, i)] } else { phi[(j, i)] };
                            for b in 0..r1 {
                                let r = if term > 0 && var > sys.k {
                                    sys.dgr[var - sys.k - 1][(b, qi)]
                                } else {
                                    sys.gr[(b, qi)]
                                };
                                row[(a * n + i) * r1 + b] = w * l * c * r;
                            }
                        }
                    }
                    let t = (pi * n + j) * q + qi;
                    let target = if term == 0 { values[t] } else { grads[t * d + var] };
                    rows.push(row);
                    rhs.push(w * target);
                }
            }
        }
    }
    let a = Mat::from_fn(rows.len(), unknowns, |i, j| rows[i][j]);
    let b = nalgebra::DVector::from_vec(rhs);
    let x = (a.transpose() * &a).lu().solve(&(a.transpose() * b)).unwrap();
    x.iter().copied().collect()
}
