from src.scene.primitives import Box, HalfSpace, InvalidPrimitiveError, SceneError, SdfPrimitive, Sphere
from src.scene.scene import Scene, load_scene, primitive_from_dict, save_scene, scene_from_dict, sdf_eval, sdf_gradient
