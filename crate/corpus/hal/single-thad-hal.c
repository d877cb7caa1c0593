int open(const char *path, int oflag, ...) {
    int ret = hal_open(path, oflag);

    return ret;
}

int ioctl(int fd, int request, ...) {
    if (request == MSG) {
    }

    return hal_ioctl(fd, request);
}
