"""Train a one-head bitwise attention classifier on a needle task.

Label is 1 when token 7 appears in the sequence. Takes about a minute.
"""
from bitattn import TifConfig
from bitattn.toytrain import SynthTask, train

task = SynthTask()
log = train(task, TifConfig(8), epochs=30, seed=42)
for epoch, loss, acc in log.rows[::5]:
    print(f"epoch {epoch:2d}  loss {loss:.4f}  test acc {acc:.3f}")
print("final", log.final_accuracy)

# fewer time steps: coarser spikes, same task
print("T=2 final", train(task, TifConfig(2), epochs=30, seed=42).final_accuracy)
