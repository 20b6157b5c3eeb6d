// Masks one attention head and shows that its gate gradient vanishes while
// the others stay live.

use headprune::encoder::{ArchConfig, Batch, EncoderModel, HeadCoord, HeadMask, ModelConfig};
use headprune::Result;

pub fn run_example() -> Result<()> {
    let arch = ArchConfig { num_layers: 2, num_heads: 2, model_dim: 8, feedforward_dim: 16, max_sequence_length: 16 };
    let mut model = EncoderModel::new(ModelConfig::new(&arch, 20, 3, 1))?;
    println!("{} parameters", model.num_parameters());
    let batch = Batch::from_sequences(&[vec![2, 7, 9, 4], vec![5, 3]], &[vec![0, 1, 2, 1], vec![2, 0]], 0, 0)?;

    let full = HeadMask::full(2, 2);
    let masked = HeadMask::with_pruned(2, 2, &[HeadCoord::new(1, 0)])?;
    for (name, mask) in [("full", &full), ("without (1,0)", &masked)] {
        let loss = model.backward_batch(&batch, mask)?.unwrap_or(f64::NAN);
        let grads: Vec<String> = model.head_gate_grads()?.iter().map(|g| format!("{g:.2e}")).collect();
        model.clear_grads();
        println!("{name:>14}: loss {loss:.4}  |gate grads| {}", grads.join(" "));
    }
    let a = model.logits(&batch, &full)?;
    let b = model.logits(&batch, &masked)?;
    let diff = a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    println!("max logit change from masking: {diff:.4}");
    Ok(())
}

fn main() -> Result<()> {
    run_example()
}
