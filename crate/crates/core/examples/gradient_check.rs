//! Compares the analytic gradient of the joint objective with central
//! finite differences, parameter tensor by parameter tensor.

use dauto::model::{Architecture, DautoModel, LabeledBatch, LossWeights, UnlabeledBatch};
use dauto::tensor::{gaussian_init, Rng};

fn main() -> dauto::Result<()> {
    let mut rng = Rng::new(2024);
    let mut model = DautoModel::new(Architecture::new(4, vec![6, 3], 3), &mut rng)?;
    let x = gaussian_init(&mut rng, 5, 4, 1.0)?;
    let u = gaussian_init(&mut rng, 6, 4, 1.0)?;
    let y = [0, 2, 1, 1, 0];
    let domains = [0, 0, 0, 1, 1, 1];
    let weights = LossWeights {
        lambda: 0.5,
        mu: 0.7,
        weight_decay: 0.0,
    };

    // Everything but the domain head descends L_y + λL_r − μL_d; the head descends L_d.
    let objective = |m: &mut DautoModel, head: bool| -> f64 {
        let l = m
            .joint_loss(
                LabeledBatch { x: &x, y: &y },
                Some(UnlabeledBatch {
                    x: &u,
                    domains: &domains,
                }),
                weights,
                None,
            )
            .unwrap();
        if head {
            l.parts.domain
        } else {
            l.parts.label + weights.lambda * l.parts.recon - weights.mu * l.parts.domain
        }
    };
    let analytic = model
        .joint_loss(
            LabeledBatch { x: &x, y: &y },
            Some(UnlabeledBatch {
                x: &u,
                domains: &domains,
            }),
            weights,
            None,
        )?
        .grads
        .flatten();

    let h = 1e-5;
    let names: Vec<String> = model.params_mut().into_iter().map(|p| p.name).collect();
    for (k, name) in names.iter().enumerate() {
        let head = name.starts_with("domain_head");
        let mut worst = 0.0f64;
        for (i, &a) in analytic[k].iter().enumerate() {
            let mut probe = model.clone();
            probe.params_mut()[k].values[i] += h;
            let up = objective(&mut probe, head);
            probe.params_mut()[k].values[i] -= 2.0 * h;
            let down = objective(&mut probe, head);
            let numeric = (up - down) / (2.0 * h);
            worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8));
        }
        println!("{name:<20} max relative error {worst:.2e}");
    }
    Ok(())
}
