//! Direct encoder→decoder round trip for a trained weight file.
use coofdm_core::ae::{self, LatentBlock};
use coofdm_core::signal;

fn main() {
    let path = std::env::args().nth(1).expect("weight file");
    let params = ae::load_weights(std::path::Path::new(&path)).unwrap();
    let bits = signal::prbs_generate(12345, 855 * 16 * 4).unwrap();
    let syms = signal::qam16_map(&bits).unwrap();
    let mut err = 0usize;
    let mut mse = 0.0;
    let mut lat_pow = 0.0;
    for chunk in syms.symbols.chunks(855) {
        let x = ae::pack_symbols(chunk);
        let latent = ae::encoder_forward(&x, &params).unwrap();
        lat_pow += latent.values.iter().map(|v| v * v).sum::<f64>() / latent.values.len() as f64;
        let mut out_reals = ae::decoder_forward(&latent, &params).unwrap();
        ae::normalize_latent(&mut out_reals).unwrap();
        let out = ae::unpack_symbols(&out_reals);
        for (a, b) in chunk.iter().zip(&out) {
            mse += (a - b).norm_sqr();
        }
        let rx_bits = signal::qam16_demap(&out);
        let tx_bits = signal::qam16_demap(chunk);
        err += rx_bits.bits.iter().zip(tx_bits.bits.iter()).filter(|(a, b)| a != b).count();
    }
    let n_blocks = syms.symbols.len() / 855;
    println!(
        "direct encode->decode: {} bit errors / {}, mse/complex {:.6}, latent power/real {:.4}",
        err, bits.len(), mse / syms.symbols.len() as f64, lat_pow / n_blocks as f64
    );
}
