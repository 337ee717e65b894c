"""
Training one model
==================

Early stopping on train/validation picks an epoch budget, then the
model is retrained from scratch on train+validation for that many
epochs and scored on the test split.
"""
from spxnet import TrainConfig, build_dataset, build_model, evaluate, load_fixture, select_features
from spxnet import two_stage_train

ds = build_dataset(select_features(load_fixture()))
config = TrainConfig(seed=1)

result = two_stage_train(lambda seed: build_model("conv1fc", seed=seed), ds, config)
curves = result.curves
print(f"best epoch {curves.best_epoch}, stopped at {curves.stopped_epoch}")
for epoch, (tr, va) in enumerate(zip(curves.train_loss, curves.val_loss), start=1):
    marker = " <- best" if epoch == curves.best_epoch else ""
    print(f"{epoch:3d}  train {tr:.5f}  val {va:.5f}{marker}")

print(f"stage 2: {len(result.stage2_loss)} epochs on {result.stage2_samples} samples")

x, _, anchor, labels = ds.part("test")
ev = evaluate(result.model, x, anchor, labels)
print(f"test accuracy {ev.accuracy:.4f}, precision {ev.precision:.4f}, "
      f"predicted up on {ev.up_fraction_predicted:.1%} of days")

# weights round-trip through JSON
result.model.save("conv1fc_seed1.json")
