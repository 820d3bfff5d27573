use super::{Layout, ModelConfig};
use crate::error::{Error, Result};
use crate::numerics::{Axis, Graph, NodeId, ParamId, Real, Tensor};

/// Adds every tensor in `params` to the graph as a parameter leaf, with
/// `ParamId` equal to its position.
pub fn register_params<'p, T: Real>(g: &mut Graph<'p, T>, params: &'p [Tensor<T>]) -> Result<Vec<NodeId>> {
    params.iter().enumerate().map(|(i, p)| g.param(ParamId(i), p)).collect()
}

fn zeros<T: Real>(g: &mut Graph<'_, T>, n: usize) -> Result<NodeId> {
    g.input(Tensor::zeros(&[1, n]))
}

fn lstm_cell<T: Real>(
    g: &mut Graph<'_, T>,
    x: NodeId,
    h: NodeId,
    c: NodeId,
    w: NodeId,
    b: NodeId,
    hid: usize,
) -> Result<(NodeId, NodeId)> {
    let xh = g.concat(&[x, h], Axis::Cols)?;
    let pre = g.matmul(xh, w)?;
    let gates = g.add(pre, b)?;
    let i = g.slice(gates, Axis::Cols, 0, hid)?;
    let i = g.sigmoid(i)?;
    let f = g.slice(gates, Axis::Cols, hid, hid)?;
    let f = g.sigmoid(f)?;
    let gg = g.slice(gates, Axis::Cols, 2 * hid, hid)?;
    let gg = g.tanh(gg)?;
    let o = g.slice(gates, Axis::Cols, 3 * hid, hid)?;
    let o = g.sigmoid(o)?;
    let fc = g.mul(f, c)?;
    let ig = g.mul(i, gg)?;
    let c2 = g.add(fc, ig)?;
    let tc = g.tanh(c2)?;
    let h2 = g.mul(o, tc)?;
    Ok((h2, c2))
}

/// Teacher-forced cross-entropy of `target` given `source`, averaged over
/// the predicted target positions.
///
/// `target` must start with BOS and end with EOS; position `t` predicts
/// `target[t + 1]`. `nodes` are the model parameters as registered by
/// [`register_params`].
pub fn build_loss<T: Real>(
    g: &mut Graph<'_, T>,
    nodes: &[NodeId],
    layout: &Layout,
    config: &ModelConfig,
    source: &[usize],
    target: &[usize],
) -> Result<NodeId> {
    if source.is_empty() {
        return Err(Error::invalid("empty source sequence"));
    }
    if target.len() < 2 {
        return Err(Error::invalid("target needs at least BOS and one token"));
    }
    let source = &source[..source.len().min(config.max_source_len)];
    let (hid, d) = (config.hidden_dim, config.dec_dim());

    let emb = g.embedding(nodes[layout.src_embed], source)?;
    let mut rows: Vec<NodeId> = (0..source.len())
        .map(|t| g.slice(emb, Axis::Rows, t, 1))
        .collect::<Result<_>>()?;
    let (mut fwd_final, mut bwd_final) = (None, None);
    for pair in &layout.encoder {
        let mut outs: [Vec<NodeId>; 2] = [Vec::new(), Vec::new()];
        for (dir, idx) in pair.iter().enumerate() {
            let (w, b) = (nodes[idx.w], nodes[idx.b]);
            let mut h = zeros(g, hid)?;
            let mut c = zeros(g, hid)?;
            let mut out = vec![h; rows.len()];
            let order: Vec<usize> = if dir == 0 {
                (0..rows.len()).collect()
            } else {
                (0..rows.len()).rev().collect()
            };
            for t in order {
                (h, c) = lstm_cell(g, rows[t], h, c, w, b, hid)?;
                out[t] = h;
            }
            outs[dir] = out;
        }
        fwd_final = Some(outs[0][rows.len() - 1]);
        bwd_final = Some(outs[1][0]);
        rows = outs[0]
            .iter()
            .zip(&outs[1])
            .map(|(&f, &b)| g.concat(&[f, b], Axis::Cols))
            .collect::<Result<_>>()?;
    }
    let (fwd_final, bwd_final) = fwd_final
        .zip(bwd_final)
        .ok_or_else(|| Error::invalid("encoder has no layers"))?;
    let memory = g.concat(&rows, Axis::Rows)?;
    let memory_t = g.transpose(memory)?;
    let v = g.concat(&[fwd_final, bwd_final], Axis::Cols)?;

    let h0 = g.matmul(v, nodes[layout.init_w])?;
    let mut h = g.add(h0, nodes[layout.init_b])?;
    let mut c = zeros(g, d)?;
    let mut feed = zeros(g, d)?;
    let tgt_emb = g.embedding(nodes[layout.tgt_embed], &target[..target.len() - 1])?;
    let mut logits = Vec::with_capacity(target.len() - 1);
    for t in 0..target.len() - 1 {
        let e = g.slice(tgt_emb, Axis::Rows, t, 1)?;
        let x = g.concat(&[e, feed], Axis::Cols)?;
        (h, c) = lstm_cell(g, x, h, c, nodes[layout.decoder.w], nodes[layout.decoder.b], d)?;
        let q = g.matmul(h, nodes[layout.attn])?;
        let scores = g.matmul(q, memory_t)?;
        let weights = g.softmax(scores)?;
        let ctx = g.matmul(weights, memory)?;
        let ch = g.concat(&[ctx, h], Axis::Cols)?;
        let comb = g.matmul(ch, nodes[layout.comb])?;
        feed = g.relu(comb)?;
        let out = g.matmul(feed, nodes[layout.out_w])?;
        logits.push(g.add(out, nodes[layout.out_b])?);
    }
    let logits = g.concat(&logits, Axis::Rows)?;
    g.cross_entropy(logits, &target[1..])
}
