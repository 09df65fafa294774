"""VoxField API Module"""
