//! Gradient checks for every graph operation and both students, grouped so
//! the unit tests and the acceptance run share one definition.

use b2m::autodiff::{Graph, Tensor, Var};
use b2m::losses::{
    combined_loss, contrastive_transfer_loss, latent_transfer_loss, task_loss_sequence, vae_loss,
    EmbeddingBatch, ModelBatch,
};
use b2m::rng::Rng;
use b2m::scene_task::SceneDims;
use b2m::students::{GruInput, GruStudent, GruStudentConfig, Mode, VaeStudent, VaeStudentConfig};

use super::{gradcheck, random_tensor};

/// `sum(out * w)` with a fixed random `w`, so every output entry matters.
fn project(g: &mut Graph, out: Var, seed: u64) -> Var {
    let shape = g.shape(out).to_vec();
    let w = g.constant(random_tensor(&shape, &mut Rng::seed_from(seed)));
    let p = g.mul(out, w).unwrap();
    g.sum(p)
}

fn check(
    out: &mut Vec<(&'static str, f64)>,
    name: &'static str,
    params: &[Tensor],
    build: impl Fn(&mut Graph, &[Var]) -> Var,
) {
    out.push((name, gradcheck(params, build)));
}

fn rt(shape: &[usize], seed: u64) -> Tensor {
    random_tensor(shape, &mut Rng::seed_from(seed))
}

pub fn elementwise_binary_ops() -> Vec<(&'static str, f64)> {
    let mut out = Vec::new();
    let ps = [rt(&[3, 4], 1), rt(&[3, 4], 2)];
    check(&mut out, "add", &ps, |g, v| {
        let o = g.add(v[0], v[1]).unwrap();
        project(g, o, 9)
    });
    check(&mut out, "sub", &ps, |g, v| {
        let o = g.sub(v[0], v[1]).unwrap();
        project(g, o, 9)
    });
    check(&mut out, "mul", &ps, |g, v| {
        let o = g.mul(v[0], v[1]).unwrap();
        project(g, o, 9)
    });
    check(&mut out, "square", &ps[..1], |g, v| {
        let o = g.square(v[0]);
        project(g, o, 9)
    });
    check(&mut out, "affine", &ps[..1], |g, v| {
        let o = g.affine(v[0], -1.7, 0.3);
        project(g, o, 9)
    });
    out
}

pub fn bias_and_matrix_ops() -> Vec<(&'static str, f64)> {
    let mut out = Vec::new();
    for bias_shape in [vec![4], vec![1, 4]] {
        check(
            &mut out,
            "add_bias",
            &[rt(&[3, 4], 1), rt(&bias_shape, 2)],
            |g, v| {
                let o = g.add_bias(v[0], v[1]).unwrap();
                project(g, o, 9)
            },
        );
    }
    check(
        &mut out,
        "matmul",
        &[rt(&[3, 4], 1), rt(&[4, 2], 2)],
        |g, v| {
            let o = g.matmul(v[0], v[1]).unwrap();
            project(g, o, 9)
        },
    );
    check(&mut out, "transpose", &[rt(&[3, 4], 1)], |g, v| {
        let o = g.transpose(v[0]).unwrap();
        project(g, o, 9)
    });
    check(
        &mut out,
        "concat rows",
        &[rt(&[2, 3], 1), rt(&[1, 3], 2)],
        |g, v| {
            let o = g.concat(&[v[0], v[1], v[0]], 0).unwrap();
            project(g, o, 9)
        },
    );
    check(
        &mut out,
        "concat cols",
        &[rt(&[2, 3], 1), rt(&[2, 1], 2)],
        |g, v| {
            let o = g.concat(&[v[0], v[1]], 1).unwrap();
            project(g, o, 9)
        },
    );
    check(&mut out, "slice rows", &[rt(&[5, 3], 1)], |g, v| {
        let o = g.slice(v[0], 0, 1, 3).unwrap();
        project(g, o, 9)
    });
    check(&mut out, "slice cols", &[rt(&[5, 3], 1)], |g, v| {
        let o = g.slice(v[0], 1, 1, 2).unwrap();
        project(g, o, 9)
    });
    out
}

pub fn activations() -> Vec<(&'static str, f64)> {
    let mut out = Vec::new();
    let x = [rt(&[3, 4], 3)];
    check(&mut out, "sigmoid", &x, |g, v| {
        let o = g.sigmoid(v[0]).unwrap();
        project(g, o, 9)
    });
    check(&mut out, "tanh", &x, |g, v| {
        let o = g.tanh(v[0]).unwrap();
        project(g, o, 9)
    });
    check(&mut out, "exp", &x, |g, v| {
        let o = g.exp(v[0]).unwrap();
        project(g, o, 9)
    });
    check(&mut out, "leaky_relu", &x, |g, v| {
        let o = g.leaky_relu(v[0], 0.01).unwrap();
        project(g, o, 9)
    });
    let positive = Tensor::new(
        vec![3, 4],
        rt(&[3, 4], 3)
            .data()
            .iter()
            .map(|x| x.abs() + 0.2)
            .collect(),
    )
    .unwrap();
    check(&mut out, "log", &[positive], |g, v| {
        let o = g.log(v[0]).unwrap();
        project(g, o, 9)
    });
    out
}

pub fn reductions() -> Vec<(&'static str, f64)> {
    let mut out = Vec::new();
    let x = [rt(&[4, 4], 5)];
    check(&mut out, "sum", &x, |g, v| g.sum(v[0]));
    check(&mut out, "mean", &x, |g, v| {
        let s = g.square(v[0]);
        g.mean(s)
    });
    check(&mut out, "logsumexp_rows", &x, |g, v| {
        let o = g.logsumexp_rows(v[0]).unwrap();
        project(g, o, 9)
    });
    check(&mut out, "diag", &x, |g, v| {
        let o = g.diag(v[0]).unwrap();
        project(g, o, 9)
    });
    out
}

pub fn transfer_and_task_losses() -> Vec<(&'static str, f64)> {
    let mut out = Vec::new();
    let mut rng = Rng::seed_from(11);
    let teacher_rows: Vec<Vec<f64>> = (0..5).map(|_| rng.normals(3)).collect();
    let ids: Vec<u64> = (0..5).collect();
    let teacher = EmbeddingBatch::teacher(&teacher_rows, ids.clone()).unwrap();
    let model = [rt(&[5, 3], 12)];
    check(&mut out, "contrastive", &model, |g, v| {
        let mb = ModelBatch {
            embeddings: v[0],
            ids: ids.clone(),
        };
        contrastive_transfer_loss(g, &teacher, &mb, 0.5).unwrap()
    });
    check(&mut out, "latent", &model, |g, v| {
        let mb = ModelBatch {
            embeddings: v[0],
            ids: ids.clone(),
        };
        latent_transfer_loss(g, &teacher, &mb).unwrap()
    });
    let targets = [1.0, -1.0, -1.0, 1.0, -1.0];
    check(
        &mut out,
        "task + combined",
        &[rt(&[5, 1], 13), rt(&[5, 3], 14)],
        |g, v| {
            let task = task_loss_sequence(g, v[0], &targets).unwrap();
            let mb = ModelBatch {
                embeddings: v[1],
                ids: ids.clone(),
            };
            let transfer = contrastive_transfer_loss(g, &teacher, &mb, 0.1).unwrap();
            combined_loss(g, task, transfer, 0.3).unwrap()
        },
    );
    let target = Tensor::new(vec![2, 3], vec![0.1, 0.5, 0.9, 0.3, 0.0, 1.0]).unwrap();
    check(
        &mut out,
        "vae loss",
        &[rt(&[2, 3], 15), rt(&[2, 2], 16), rt(&[2, 2], 17)],
        |g, v| {
            let recon = g.sigmoid(v[0]).unwrap();
            vae_loss(g, recon, &target, v[1], v[2], 0.7).unwrap()
        },
    );
    out
}

pub fn full_gru_student() -> Vec<(&'static str, f64)> {
    let mut out = Vec::new();
    let config = GruStudentConfig {
        hidden_size: 3,
        embedding_dim: 2,
        ..Default::default()
    };
    let student = GruStudent::new(config, &mut Rng::seed_from(21)).unwrap();
    let input = GruInput::from_symbols(&[vec![0, 1, 3, 2, 2, 0]]).unwrap();
    let mut rng = Rng::seed_from(22);
    let teacher_rows: Vec<Vec<f64>> = (0..4).map(|_| rng.normals(2)).collect();
    let ids: Vec<u64> = (0..4).collect();
    let teacher = EmbeddingBatch::teacher(&teacher_rows, ids.clone()).unwrap();
    let targets = [1.0, -1.0, -1.0, 1.0];
    check(&mut out, "gru", &student.params.tensors, |g, v| {
        // same dropout masks for every evaluation
        let mut drop = Rng::seed_from(23);
        let out = student
            .forward(g, v, &input, Mode::Train(&mut drop))
            .unwrap();
        let pred = out.sequence_predictions(g, 2).unwrap();
        let task = task_loss_sequence(g, pred, &targets).unwrap();
        let mb = out.transfer_batch(g, 2, ids.clone()).unwrap();
        let transfer = contrastive_transfer_loss(g, &teacher, &mb, 0.1).unwrap();
        combined_loss(g, task, transfer, 0.2).unwrap()
    });
    out
}

pub fn full_vae_student() -> Vec<(&'static str, f64)> {
    let mut out = Vec::new();
    let config = VaeStudentConfig {
        dims: SceneDims {
            width: 3,
            height: 2,
            channels: 1,
        },
        hidden_widths: vec![4],
        embedding_dim: 2,
        beta: 0.5,
    };
    let student = VaeStudent::new(config, &mut Rng::seed_from(31)).unwrap();
    let mut rng = Rng::seed_from(32);
    let x = Tensor::new(vec![3, 6], (0..18).map(|_| rng.uniform()).collect()).unwrap();
    let h = Tensor::new(vec![2, 6], (0..12).map(|_| rng.uniform()).collect()).unwrap();
    let teacher = EmbeddingBatch::teacher(&[rng.normals(2), rng.normals(2)], vec![0, 1]).unwrap();
    check(&mut out, "vae", &student.params.tensors, |g, v| {
        let mut eps = Rng::seed_from(33);
        let out = student.forward(g, v, &x, Mode::Train(&mut eps)).unwrap();
        let task = vae_loss(g, out.reconstruction, &x, out.mu, out.logvar, 0.5).unwrap();
        let mb = student.transfer_batch(g, v, &h, vec![0, 1]).unwrap();
        let transfer = latent_transfer_loss(g, &teacher, &mb).unwrap();
        combined_loss(g, task, transfer, 0.1).unwrap()
    });
    out
}

/// Every case, in group order.
pub fn all() -> Vec<(&'static str, f64)> {
    let groups: [fn() -> Vec<(&'static str, f64)>; 7] = [
        elementwise_binary_ops,
        bias_and_matrix_ops,
        activations,
        reductions,
        transfer_and_task_losses,
        full_gru_student,
        full_vae_student,
    ];
    groups.iter().flat_map(|f| f()).collect()
}
