//! Binary snapshots of the three-agent cascade.
//!
//! The file captures everything needed to resume decision-making exactly:
//! network weights, optimizer moments and step count, exploration epsilon,
//! discount, and the full rng state (seed, stream, word position). Replay
//! buffers are deliberately not stored; they refill within a few steps and
//! their contents only shape transient gradient noise. Schedule parameters
//! (decay, floor) and buffer sizing come from the config passed at load time.
//!
//! Layout, all little-endian: the magic `GRFG0001`, then three agent blocks
//! in cascade order (first group picker, operation picker, second group
//! picker). Each block is a kind byte (0 group, 1 operation), epsilon, gamma,
//! rng state (32-byte seed, u64 stream, u128 word position), five u32 dims
//! (input, hidden, output, then the state/candidate or state/action split),
//! the four weight arrays, and the Adam state (step count, then first and
//! second moments in weight-array order).

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::adam::AdamState;
use super::agent::{AgentConfig, GroupAgent, OpAgent, LEARNING_RATE};
use super::mlp::Mlp;
use super::replay::ReplayBuffer;
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"GRFG0001";
const KIND_GROUP: u8 = 0;
const KIND_OP: u8 = 1;

pub fn save_cascade(
    path: &Path,
    group1: &GroupAgent,
    op: &OpAgent,
    group2: &GroupAgent,
) -> Result<()> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    write_group(&mut out, group1);
    write_op(&mut out, op);
    write_group(&mut out, group2);
    std::fs::write(path, &out).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_cascade(path: &Path, cfg: &AgentConfig) -> Result<(GroupAgent, OpAgent, GroupAgent)> {
    let data = std::fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut r = Reader {
        data: &data,
        pos: 0,
    };
    let magic = r.bytes(8)?;
    if magic != MAGIC {
        return Err(Error::Parse {
            position: 0,
            message: "bad checkpoint magic".to_string(),
        });
    }
    let g1 = read_group(&mut r, cfg)?;
    let op = read_op(&mut r, cfg)?;
    let g2 = read_group(&mut r, cfg)?;
    if r.pos != data.len() {
        return Err(Error::Parse {
            position: r.pos,
            message: "trailing bytes after checkpoint payload".to_string(),
        });
    }
    Ok((g1, op, g2))
}

fn write_common(out: &mut Vec<u8>, kind: u8, epsilon: f64, gamma: f64, rng: &ChaCha8Rng) {
    out.push(kind);
    out.extend_from_slice(&epsilon.to_le_bytes());
    out.extend_from_slice(&gamma.to_le_bytes());
    out.extend_from_slice(&rng.get_seed());
    out.extend_from_slice(&rng.get_stream().to_le_bytes());
    out.extend_from_slice(&rng.get_word_pos().to_le_bytes());
}

fn write_net(out: &mut Vec<u8>, net: &Mlp, opt: &AdamState, dim_a: usize, dim_b: usize) {
    for d in [net.input_dim, net.hidden_dim, net.output_dim, dim_a, dim_b] {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for arr in [&net.w1, &net.b1, &net.w2, &net.b2] {
        write_f64s(out, arr);
    }
    out.extend_from_slice(&opt.t.to_le_bytes());
    for arr in [&opt.m.w1, &opt.m.b1, &opt.m.w2, &opt.m.b2] {
        write_f64s(out, arr);
    }
    for arr in [&opt.v.w1, &opt.v.b1, &opt.v.w2, &opt.v.b2] {
        write_f64s(out, arr);
    }
}

fn write_group(out: &mut Vec<u8>, agent: &GroupAgent) {
    write_common(out, KIND_GROUP, agent.epsilon, agent.cfg.gamma, &agent.rng);
    write_net(
        out,
        &agent.net,
        &agent.opt,
        agent.state_dim,
        agent.candidate_dim,
    );
}

fn write_op(out: &mut Vec<u8>, agent: &OpAgent) {
    write_common(out, KIND_OP, agent.epsilon, agent.cfg.gamma, &agent.rng);
    write_net(
        out,
        &agent.net,
        &agent.opt,
        agent.state_dim,
        agent.n_actions,
    );
}

fn write_f64s(out: &mut Vec<u8>, values: &[f64]) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn bytes(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return Err(Error::Parse {
                position: self.pos,
                message: "checkpoint truncated".to_string(),
            });
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.bytes(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes(8)?.try_into().unwrap()))
    }

    fn u128(&mut self) -> Result<u128> {
        Ok(u128::from_le_bytes(self.bytes(16)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }
}

struct CommonHeader {
    epsilon: f64,
    gamma: f64,
    rng: ChaCha8Rng,
}

fn read_common(r: &mut Reader, expect_kind: u8) -> Result<CommonHeader> {
    let kind_pos = r.pos;
    let kind = r.u8()?;
    if kind != expect_kind {
        return Err(Error::Parse {
            position: kind_pos,
            message: format!("expected agent kind {expect_kind}, found {kind}"),
        });
    }
    let epsilon = r.f64()?;
    let gamma = r.f64()?;
    let seed: [u8; 32] = r.bytes(32)?.try_into().unwrap();
    let stream = r.u64()?;
    let word_pos = r.u128()?;
    let mut rng = ChaCha8Rng::from_seed(seed);
    rng.set_stream(stream);
    rng.set_word_pos(word_pos);
    Ok(CommonHeader {
        epsilon,
        gamma,
        rng,
    })
}

fn read_net(r: &mut Reader) -> Result<(Mlp, AdamState, usize, usize)> {
    let dims_pos = r.pos;
    let input_dim = r.u32()? as usize;
    let hidden_dim = r.u32()? as usize;
    let output_dim = r.u32()? as usize;
    let dim_a = r.u32()? as usize;
    let dim_b = r.u32()? as usize;
    if input_dim == 0 || hidden_dim == 0 || output_dim == 0 {
        return Err(Error::Parse {
            position: dims_pos,
            message: "zero network dimension in checkpoint".to_string(),
        });
    }
    let w1 = r.f64s(hidden_dim * input_dim)?;
    let b1 = r.f64s(hidden_dim)?;
    let w2 = r.f64s(output_dim * hidden_dim)?;
    let b2 = r.f64s(output_dim)?;
    let net = Mlp {
        input_dim,
        hidden_dim,
        output_dim,
        w1,
        b1,
        w2,
        b2,
    };
    let mut opt = AdamState::new(&net, LEARNING_RATE);
    opt.t = r.u64()?;
    opt.m.w1 = r.f64s(hidden_dim * input_dim)?;
    opt.m.b1 = r.f64s(hidden_dim)?;
    opt.m.w2 = r.f64s(output_dim * hidden_dim)?;
    opt.m.b2 = r.f64s(output_dim)?;
    opt.v.w1 = r.f64s(hidden_dim * input_dim)?;
    opt.v.b1 = r.f64s(hidden_dim)?;
    opt.v.w2 = r.f64s(output_dim * hidden_dim)?;
    opt.v.b2 = r.f64s(output_dim)?;
    Ok((net, opt, dim_a, dim_b))
}

fn read_group(r: &mut Reader, cfg: &AgentConfig) -> Result<GroupAgent> {
    let header = read_common(r, KIND_GROUP)?;
    let dims_pos = r.pos;
    let (net, opt, state_dim, candidate_dim) = read_net(r)?;
    if state_dim + candidate_dim != net.input_dim || net.output_dim != 1 {
        return Err(Error::Parse {
            position: dims_pos,
            message: "inconsistent group agent dimensions".to_string(),
        });
    }
    let mut cfg = cfg.clone();
    cfg.gamma = header.gamma;
    cfg.hidden_dim = net.hidden_dim;
    let buffer = ReplayBuffer::new(cfg.replay_capacity);
    Ok(GroupAgent {
        net,
        opt,
        cfg,
        epsilon: header.epsilon,
        rng: header.rng,
        buffer,
        state_dim,
        candidate_dim,
    })
}

fn read_op(r: &mut Reader, cfg: &AgentConfig) -> Result<OpAgent> {
    let header = read_common(r, KIND_OP)?;
    let dims_pos = r.pos;
    let (net, opt, state_dim, n_actions) = read_net(r)?;
    if state_dim != net.input_dim || n_actions != net.output_dim {
        return Err(Error::Parse {
            position: dims_pos,
            message: "inconsistent operation agent dimensions".to_string(),
        });
    }
    let mut cfg = cfg.clone();
    cfg.gamma = header.gamma;
    cfg.hidden_dim = net.hidden_dim;
    let buffer = ReplayBuffer::new(cfg.replay_capacity);
    Ok(OpAgent {
        net,
        opt,
        cfg,
        epsilon: header.epsilon,
        rng: header.rng,
        buffer,
        state_dim,
        n_actions,
    })
}
