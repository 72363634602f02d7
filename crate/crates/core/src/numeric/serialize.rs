//! Binary snapshots of networks and optimizer states.
//!
//! All integers are little-endian `u32`/`u64`, all reals little-endian IEEE-754 `f64`.
//!
//! Network (`.mlp`):
//!
//! ```text
//! magic      8 bytes  "CHACMLP1"
//! hidden     u32      activation code (0 identity, 1 relu, 2 tanh)
//! output     u32      activation code
//! n_layers   u32
//! shapes     n_layers × (out u32, in u32)
//! per layer  out·in weights (row-major), then out biases
//! ```
//!
//! Optimizer (`.adam`):
//!
//! ```text
//! magic      8 bytes  "CHACADM1"
//! step       u64
//! beta1, beta2, epsilon   f64
//! n_layers   u32
//! shapes     n_layers × (n_weights u32, n_bias u32)
//! per layer  first-moment weights, first-moment bias, second-moment weights, second-moment bias
//! ```

use std::io::{Read, Write};

use super::adam::AdamState;
use super::mlp::{Activation, DenseLayer, LayerGradient, Mlp};
use super::NumericError;

const MLP_MAGIC: &[u8; 8] = b"CHACMLP1";
const ADAM_MAGIC: &[u8; 8] = b"CHACADM1";

fn put_u32<W: Write>(w: &mut W, v: u32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn put_f64s<W: Write>(w: &mut W, vs: &[f64]) -> std::io::Result<()> {
    for v in vs {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn get_u32<R: Read>(r: &mut R) -> Result<u32, NumericError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn get_u64<R: Read>(r: &mut R) -> Result<u64, NumericError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn get_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>, NumericError> {
    let mut out = Vec::with_capacity(n);
    let mut b = [0u8; 8];
    for _ in 0..n {
        r.read_exact(&mut b)?;
        out.push(f64::from_le_bytes(b));
    }
    Ok(out)
}

fn check_magic<R: Read>(r: &mut R, magic: &[u8; 8]) -> Result<(), NumericError> {
    let mut m = [0u8; 8];
    r.read_exact(&mut m)?;
    if &m != magic {
        return Err(NumericError::Format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&m),
            String::from_utf8_lossy(magic)
        )));
    }
    Ok(())
}

pub fn write_mlp<W: Write>(mlp: &Mlp, w: &mut W) -> Result<(), NumericError> {
    w.write_all(MLP_MAGIC)?;
    put_u32(w, mlp.hidden_activation().code())?;
    put_u32(w, mlp.output_activation().code())?;
    put_u32(w, mlp.layers().len() as u32)?;
    for l in mlp.layers() {
        put_u32(w, l.out_dim() as u32)?;
        put_u32(w, l.in_dim() as u32)?;
    }
    for l in mlp.layers() {
        put_f64s(w, l.weights())?;
        put_f64s(w, l.bias())?;
    }
    Ok(())
}

pub fn read_mlp<R: Read>(r: &mut R) -> Result<Mlp, NumericError> {
    check_magic(r, MLP_MAGIC)?;
    let act = |code| Activation::from_code(code).ok_or_else(|| NumericError::Format(format!("unknown activation {code}")));
    let hidden = act(get_u32(r)?)?;
    let output = act(get_u32(r)?)?;
    let n = get_u32(r)? as usize;
    let shapes = (0..n).map(|_| Ok((get_u32(r)? as usize, get_u32(r)? as usize))).collect::<Result<Vec<_>, NumericError>>()?;
    let mut layers = Vec::with_capacity(n);
    for (out, inp) in shapes {
        let weights = get_f64s(r, out * inp)?;
        let bias = get_f64s(r, out)?;
        layers.push(DenseLayer::new(inp, out, weights, bias)?);
    }
    Mlp::from_layers(layers, hidden, output)
}

pub fn write_adam<W: Write>(state: &AdamState, w: &mut W) -> Result<(), NumericError> {
    w.write_all(ADAM_MAGIC)?;
    w.write_all(&state.step_count.to_le_bytes())?;
    put_f64s(w, &[state.beta1, state.beta2, state.epsilon])?;
    put_u32(w, state.first_moment.len() as u32)?;
    for m in &state.first_moment {
        put_u32(w, m.weights.len() as u32)?;
        put_u32(w, m.bias.len() as u32)?;
    }
    for (m, v) in state.first_moment.iter().zip(&state.second_moment) {
        put_f64s(w, &m.weights)?;
        put_f64s(w, &m.bias)?;
        put_f64s(w, &v.weights)?;
        put_f64s(w, &v.bias)?;
    }
    Ok(())
}

pub fn read_adam<R: Read>(r: &mut R) -> Result<AdamState, NumericError> {
    check_magic(r, ADAM_MAGIC)?;
    let step_count = get_u64(r)?;
    let hp = get_f64s(r, 3)?;
    let n = get_u32(r)? as usize;
    let shapes = (0..n).map(|_| Ok((get_u32(r)? as usize, get_u32(r)? as usize))).collect::<Result<Vec<_>, NumericError>>()?;
    let mut first_moment = Vec::with_capacity(n);
    let mut second_moment = Vec::with_capacity(n);
    for (nw, nb) in shapes {
        first_moment.push(LayerGradient { weights: get_f64s(r, nw)?, bias: get_f64s(r, nb)? });
        second_moment.push(LayerGradient { weights: get_f64s(r, nw)?, bias: get_f64s(r, nb)? });
    }
    Ok(AdamState { first_moment, second_moment, step_count, beta1: hp[0], beta2: hp[1], epsilon: hp[2] })
}
