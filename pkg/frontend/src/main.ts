import { ChatApi } from "./api.js";
import { App } from "./ui.js";

document.addEventListener("DOMContentLoaded", () => {
  const root = document.getElementById("app");
  if (root) {
    new App(root, new ChatApi(""));
  }
});
