//! Prints latent dispersion across distinct inputs for a weight file.
use coofdm_core::ae;
use coofdm_core::signal;

fn main() {
    let path = std::env::args().nth(1).expect("weight file");
    let params = ae::load_weights(std::path::Path::new(&path)).unwrap();
    let bits = signal::prbs_generate(777, 855 * 4 * 8).unwrap();
    let syms = signal::qam16_map(&bits).unwrap();
    let blocks: Vec<Vec<f64>> = syms
        .symbols
        .chunks(855)
        .map(|c| ae::encoder_forward(&ae::pack_symbols(c), &params).unwrap().values)
        .collect();
    let w = blocks[0].len();
    let mean: Vec<f64> = (0..w)
        .map(|j| blocks.iter().map(|b| b[j]).sum::<f64>() / blocks.len() as f64)
        .collect();
    let var: f64 = blocks
        .iter()
        .map(|b| b.iter().zip(&mean).map(|(v, m)| (v - m) * (v - m)).sum::<f64>() / w as f64)
        .sum::<f64>()
        / blocks.len() as f64;
    let mean_pow = mean.iter().map(|m| m * m).sum::<f64>() / w as f64;
    println!("across-input latent variance {:.6}, mean-component power {:.6}", var, mean_pow);
}
