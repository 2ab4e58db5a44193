//! Versioned binary checkpoints: config echo, weights, and policy
//! parameters, round-tripping bit-exactly.

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::network::{Layer, LayerSpec, Network, NeuronModel, Readout};
use crate::neuron::{LifParams, SrmParams};
use crate::threshold::{make_policy, AbnParams, PolicyKind};

const MAGIC: &[u8; 6] = b"ABNSNN";
const VERSION: u16 = 1;

fn put_u64(out: &mut impl Write, v: u64) -> Result<()> {
    out.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn put_f64(out: &mut impl Write, v: f64) -> Result<()> {
    out.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn get_u64(inp: &mut impl Read) -> Result<u64> {
    let mut buf = [0u8; 8];
    inp.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

fn get_f64(inp: &mut impl Read) -> Result<f64> {
    let mut buf = [0u8; 8];
    inp.read_exact(&mut buf)?;
    Ok(f64::from_le_bytes(buf))
}

fn get_u8(inp: &mut impl Read) -> Result<u8> {
    let mut buf = [0u8; 1];
    inp.read_exact(&mut buf)?;
    Ok(buf[0])
}

/// Serialize the network together with the resolved run configuration text.
pub fn save(path: &Path, net: &Network, config_echo: &str) -> Result<()> {
    let mut out = BufWriter::new(std::fs::File::create(path)?);
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    put_u64(&mut out, config_echo.len() as u64)?;
    out.write_all(config_echo.as_bytes())?;
    put_f64(&mut out, net.dt_ms)?;
    put_u64(&mut out, net.num_steps as u64)?;
    out.write_all(&[match net.readout {
        Readout::SpikeCount => 0u8,
        Readout::MembraneIntegral => 1u8,
    }])?;
    put_f64(&mut out, net.tau1_ms)?;
    put_u64(&mut out, net.seed)?;
    put_u64(&mut out, net.layers.len() as u64)?;
    for layer in &net.layers {
        put_u64(&mut out, layer.spec.in_size as u64)?;
        put_u64(&mut out, layer.spec.out_size as u64)?;
        match &layer.spec.model {
            NeuronModel::Lif(p) => {
                out.write_all(&[0u8])?;
                for v in [p.tau_m, p.e_l, p.r_m, p.v_reset, p.t_ref] {
                    put_f64(&mut out, v)?;
                }
            }
            NeuronModel::Srm(p) => {
                out.write_all(&[1u8])?;
                for v in [p.tau_eps, p.tau_zeta, p.zeta_amp] {
                    put_f64(&mut out, v)?;
                }
            }
        }
        let (kind_tag, mask) = match layer.spec.policy.kind() {
            PolicyKind::Fixed => (0u8, 0u8),
            PolicyKind::Abn => (1, 0),
            PolicyKind::AbnMasked {
                use_mg,
                use_trg,
                use_se,
            } => (
                2,
                (use_mg as u8) | (use_trg as u8) << 1 | (use_se as u8) << 2,
            ),
        };
        out.write_all(&[kind_tag, mask])?;
        let p = layer.spec.policy.params();
        for v in [
            p.k1,
            p.k2,
            p.k3,
            p.eta,
            p.alpha,
            p.dt,
            p.theta_init,
            p.theta_min,
            p.theta_max,
        ] {
            put_f64(&mut out, v)?;
        }
        put_u64(&mut out, p.window_n as u64)?;
        for &w in &layer.weights {
            put_f64(&mut out, w)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Load a checkpoint; returns the network and the embedded config echo.
pub fn load(path: &Path) -> Result<(Network, String)> {
    let mut inp = BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 6];
    inp.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint(format!(
            "bad magic {:?} in {}",
            magic,
            path.display()
        )));
    }
    let mut vbuf = [0u8; 2];
    inp.read_exact(&mut vbuf)?;
    let version = u16::from_le_bytes(vbuf);
    if version != VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint version {version}"
        )));
    }
    let echo_len = get_u64(&mut inp)? as usize;
    let mut echo = vec![0u8; echo_len];
    inp.read_exact(&mut echo)?;
    let config_echo = String::from_utf8(echo)
        .map_err(|e| Error::Checkpoint(format!("config echo is not UTF-8: {e}")))?;
    let dt_ms = get_f64(&mut inp)?;
    let num_steps = get_u64(&mut inp)? as usize;
    let readout = match get_u8(&mut inp)? {
        0 => Readout::SpikeCount,
        1 => Readout::MembraneIntegral,
        other => return Err(Error::Checkpoint(format!("unknown readout tag {other}"))),
    };
    let tau1_ms = get_f64(&mut inp)?;
    let seed = get_u64(&mut inp)?;
    let num_layers = get_u64(&mut inp)? as usize;
    let mut layers = Vec::with_capacity(num_layers);
    for _ in 0..num_layers {
        let in_size = get_u64(&mut inp)? as usize;
        let out_size = get_u64(&mut inp)? as usize;
        let model = match get_u8(&mut inp)? {
            0 => NeuronModel::Lif(LifParams {
                tau_m: get_f64(&mut inp)?,
                e_l: get_f64(&mut inp)?,
                r_m: get_f64(&mut inp)?,
                v_reset: get_f64(&mut inp)?,
                t_ref: get_f64(&mut inp)?,
            }),
            1 => NeuronModel::Srm(SrmParams {
                tau_eps: get_f64(&mut inp)?,
                tau_zeta: get_f64(&mut inp)?,
                zeta_amp: get_f64(&mut inp)?,
            }),
            other => return Err(Error::Checkpoint(format!("unknown model tag {other}"))),
        };
        let kind_tag = get_u8(&mut inp)?;
        let mask = get_u8(&mut inp)?;
        let kind = match kind_tag {
            0 => PolicyKind::Fixed,
            1 => PolicyKind::Abn,
            2 => PolicyKind::AbnMasked {
                use_mg: mask & 1 != 0,
                use_trg: mask & 2 != 0,
                use_se: mask & 4 != 0,
            },
            other => return Err(Error::Checkpoint(format!("unknown policy tag {other}"))),
        };
        let params = AbnParams {
            k1: get_f64(&mut inp)?,
            k2: get_f64(&mut inp)?,
            k3: get_f64(&mut inp)?,
            eta: get_f64(&mut inp)?,
            alpha: get_f64(&mut inp)?,
            dt: get_f64(&mut inp)?,
            theta_init: get_f64(&mut inp)?,
            theta_min: get_f64(&mut inp)?,
            theta_max: get_f64(&mut inp)?,
            window_n: get_u64(&mut inp)? as usize,
        };
        let policy = make_policy(kind, params)?;
        let mut weights = vec![0.0; in_size * out_size];
        for w in &mut weights {
            *w = get_f64(&mut inp)?;
        }
        layers.push(Layer {
            spec: LayerSpec {
                in_size,
                out_size,
                model,
                policy,
            },
            weights,
        });
    }
    Ok((
        Network {
            layers,
            dt_ms,
            num_steps,
            readout,
            tau1_ms,
            seed,
        },
        config_echo,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{init_network, NetworkConfig};
    use crate::threshold::ThresholdPolicy;

    #[test]
    fn round_trip_is_bit_exact() {
        let config = NetworkConfig {
            layers: vec![
                LayerSpec {
                    in_size: 5,
                    out_size: 4,
                    model: NeuronModel::Lif(LifParams::default()),
                    policy: ThresholdPolicy::abn(AbnParams::default()).unwrap(),
                },
                LayerSpec {
                    in_size: 4,
                    out_size: 3,
                    model: NeuronModel::Srm(SrmParams::default()),
                    policy: make_policy(
                        PolicyKind::AbnMasked {
                            use_mg: true,
                            use_trg: false,
                            use_se: true,
                        },
                        AbnParams::default(),
                    )
                    .unwrap(),
                },
            ],
            dt_ms: 1.0,
            num_steps: 25,
            readout: Readout::MembraneIntegral,
            tau1_ms: 0.1,
            seed: 17,
        };
        let net = init_network(&config, 17).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save(&path, &net, "[run]\nseed = 17\n").unwrap();
        let (loaded, echo) = load(&path).unwrap();
        assert_eq!(echo, "[run]\nseed = 17\n");
        assert_eq!(loaded.layers.len(), net.layers.len());
        for (a, b) in loaded.layers.iter().zip(&net.layers) {
            let bits = |ws: &[f64]| ws.iter().map(|w| w.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&a.weights), bits(&b.weights));
            assert_eq!(a.spec.policy, b.spec.policy);
            assert_eq!(a.spec.model, b.spec.model);
        }
        // Re-saving the loaded network reproduces the file byte-for-byte.
        let path2 = dir.path().join("model2.ckpt");
        save(&path2, &loaded, &echo).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&path2).unwrap()
        );
    }

    #[test]
    fn bad_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.ckpt");
        std::fs::write(&path, b"NOTANET0000").unwrap();
        assert!(load(&path).is_err());
    }
}
