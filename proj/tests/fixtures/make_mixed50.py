"""Writes mixed50.jsonl: 50 labeled trajectories across tasks and labels."""
import json
import random

rng = random.Random(50)
SYSTEM = "You are a careful assistant."
lines = []
for i in range(50):
    task = ["math", "multihop_qa", "strategy_qa"][i % 3]
    positive = rng.random() < 0.45
    if task == "math":
        answer = str(rng.randint(1, 99))
        quality = 1.0 if positive else 0.0
    elif task == "multihop_qa":
        answer = "the answer text"
        quality = 1.0 if positive else rng.choice([0.0, 0.25, 0.4, 0.5, 0.8])
    else:
        answer = rng.choice(["yes", "no"])
        quality = 1.0 if positive else 0.0
    tool = "calculator[1+1]" if task == "math" else "search[some query]"
    messages = [
        {"role": "system", "content": SYSTEM},
        {"role": "user", "content": f"Question number {i}?"},
        {"role": "assistant", "content": f"Thought: look it up.\nAction: {tool}"},
        {"role": "tool", "content": "Observation: something"},
        {"role": "assistant", "content": f"Thought: done.\nAction: finish[{answer}]"},
    ]
    lines.append({
        "question_id": f"m{i:02d}",
        "task": task,
        "model_id": "fixture",
        "temperature": [0.2, 0.5, 0.7][i % 3],
        "sample_index": i % 3,
        "outcome": {"status": "finished", "answer": answer},
        "extracted_answer": answer,
        "label": "positive" if positive else "negative",
        "quality": quality,
        "tool_call_errors": 0,
        "messages": messages,
    })

with open("mixed50.jsonl", "w") as f:
    for rec in lines:
        f.write(json.dumps(rec, separators=(",", ":")) + "\n")
