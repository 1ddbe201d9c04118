from .lime import ExplainError, default_kernel_width, lime_explain
from .shap import EXACT_MAX_FEATURES, coalition_values, exact_shap_oracle, kernel_shap, shapley_kernel
from .types import BackgroundSet, Explanation, explanations_long_csv


def explain(method: str, f, x, background: BackgroundSet, *, seed: int = 0, lime_samples: int = 5000,
            kernel_width=None, shap_coalitions: int = 2048, sample_id=None, model: str = "") -> Explanation:
    """Dispatch to LIME or Kernel SHAP by name."""
    if method == "lime":
        return lime_explain(f, x, background, lime_samples, kernel_width, seed, sample_id=sample_id, model=model)
    if method == "shap":
        return kernel_shap(f, x, background, shap_coalitions, seed, sample_id=sample_id, model=model)
    raise ExplainError(f"unknown explanation method {method!r}")
