//! Building, validating, saving and reloading scenario trees.
//!
//! ```text
//! cargo run --example tree_io
//! ```

use nested_sinkhorn::tree::{Node, ScenarioTree};
use nested_sinkhorn::{generate_random_tree, Result};

fn main() -> Result<()> {
    let tree = generate_random_tree(&[1, 2, 3, 2, 3, 4], 7)?;
    println!(
        "random tree: {} nodes, {} stages, {} leaves",
        tree.len(),
        tree.height(),
        tree.leaves().len()
    );

    let dir = std::env::temp_dir().join("nested-sinkhorn-tree-io");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("tree.json");
    std::fs::write(&path, tree.to_json())?;
    let back = ScenarioTree::from_path(&path)?;
    assert_eq!(back.nodes(), tree.nodes());
    println!("round trip through {}", path.display());

    for t in back.trajectories().iter().take(3) {
        println!(
            "  leaf {:>3}  p = {:.4}  states {:.2?}",
            t.leaf_id, t.prob, t.states
        );
    }

    let bad = vec![
        Node {
            id: 0,
            parent: None,
            state: 0.0,
            cond_prob: 1.0,
        },
        Node {
            id: 1,
            parent: Some(0),
            state: 1.0,
            cond_prob: 0.5,
        },
        Node {
            id: 2,
            parent: Some(0),
            state: -1.0,
            cond_prob: 0.6,
        },
    ];
    match ScenarioTree::new(bad) {
        Err(e) => println!("rejected: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
