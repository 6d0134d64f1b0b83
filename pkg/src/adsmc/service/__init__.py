"""Simulation service: pydantic schemas, handlers and the FastAPI app."""
