/// Min-cost flow by successive shortest paths (Bellman-Ford) on the bipartite transport graph.
/// Masses are integer units; returns the optimal total cost.
pub fn transport_lp(xs: &[f64], a: &[i64], ys: &[f64], b: &[i64], p: f64) -> f64 {
    struct Edge {
        to: usize,
        cap: i64,
        cost: f64,
    }
    let n = xs.len() + ys.len() + 2;
    let (src, sink) = (n - 2, n - 1);
    let mut edges: Vec<Edge> = Vec::new();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut add = |u: usize, v: usize, cap: i64, cost: f64, edges: &mut Vec<Edge>| {
        adj[u].push(edges.len());
        edges.push(Edge { to: v, cap, cost });
        adj[v].push(edges.len());
        edges.push(Edge { to: u, cap: 0, cost: -cost });
    };
    for (i, &m) in a.iter().enumerate() {
        add(src, i, m, 0.0, &mut edges);
    }
    for (j, &m) in b.iter().enumerate() {
        add(xs.len() + j, sink, m, 0.0, &mut edges);
    }
    for (i, x) in xs.iter().enumerate() {
        for (j, y) in ys.iter().enumerate() {
            add(i, xs.len() + j, i64::MAX / 4, (x - y).abs().powf(p), &mut edges);
        }
    }
    let mut total = 0.0;
    loop {
        let mut dist = vec![f64::INFINITY; n];
        let mut via: Vec<Option<usize>> = vec![None; n];
        dist[src] = 0.0;
        for _ in 0..n {
            let mut changed = false;
            for u in 0..n {
                if dist[u].is_infinite() {
                    continue;
                }
                for &e in &adj[u] {
                    let ed = &edges[e];
                    let d = dist[u] + ed.cost;
                    if ed.cap > 0 && (dist[ed.to].is_infinite() || d < dist[ed.to] - 1e-12 * (1.0 + d.abs())) {
                        dist[ed.to] = d;
                        via[ed.to] = Some(e);
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        if dist[sink].is_infinite() {
            return total;
        }
        let mut push = i64::MAX;
        let mut v = sink;
        while let Some(e) = via[v] {
            push = push.min(edges[e].cap);
            v = edges[e ^ 1].to;
        }
        let mut v = sink;
        while let Some(e) = via[v] {
            edges[e].cap -= push;
            edges[e ^ 1].cap += push;
            v = edges[e ^ 1].to;
        }
        total += push as f64 * dist[sink];
    }
}
