int open(const char *path, int oflag, ...) {
    int ret = hal_open(path, oflag);

    return ret;
}

int ioctl(int fd, int request, ...) {
    if (request == WR_MODE32) {
    }

    int ret = hal_ioctl(fd, request);

    return ret;
}

ssize_t read(int fd, void *buf, size_t nbyte) {

    return hal_read(fd, buf, nbyte);
}
