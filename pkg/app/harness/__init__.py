from app.harness import scenarios, runner, verify

__all__ = ["scenarios", "runner", "verify"]
